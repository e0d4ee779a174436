// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace accboed::cli
{

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace
{

using Clock = std::chrono::steady_clock;

template <typename T>
T parse_value(const std::string &key, const std::string &text)
{
   std::istringstream in(text);
   T value{};
   in >> value;
   if (in.fail() || !(in >> std::ws).eof())
   {
      throw ConfigError("bad value for " + key + ": '" + text + "'");
   }
   return value;
}

bool parse_bool(const std::string &key, const std::string &text)
{
   if (text == "true" || text == "1" || text == "yes" || text == "on") { return true; }
   if (text == "false" || text == "0" || text == "no" || text == "off") { return false; }
   throw ConfigError("bad boolean for " + key + ": '" + text + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string &key, const std::string &text)
{
   std::vector<T> out;
   std::string item;
   std::istringstream in(text);
   while (std::getline(in, item, ','))
   {
      if (item.find_first_not_of(" \t") == std::string::npos) { continue; }
      out.push_back(parse_value<T>(key, item));
   }
   return out;
}

using Setter = std::function<void(RunConfig &, const std::string &key, const std::string &)>;

template <typename T>
Setter set_num(T AccBoedConfig::*field)
{
   return [field](RunConfig &c, const std::string &k, const std::string &v)
   { c.engine.*field = parse_value<T>(k, v); };
}

Setter set_flag(bool AccBoedConfig::*field)
{
   return [field](RunConfig &c, const std::string &k, const std::string &v)
   { c.engine.*field = parse_bool(k, v); };
}

template <typename T>
Setter set_mcmc(T McmcConfig::*field)
{
   return [field](RunConfig &c, const std::string &k, const std::string &v)
   { c.engine.mcmc.*field = parse_value<T>(k, v); };
}

template <typename T>
Setter set_kmn(T KmnConfig::*field)
{
   return [field](RunConfig &c, const std::string &k, const std::string &v)
   { c.engine.kmn.*field = parse_value<T>(k, v); };
}

const std::map<std::string, std::map<std::string, Setter>> &setters()
{
   static const std::map<std::string, std::map<std::string, Setter>> table{
      {"run",
       {
          {"problem", [](RunConfig &c, const std::string &, const std::string &v) { c.problem = v; }},
          {"method",
           [](RunConfig &c, const std::string &, const std::string &v)
           {
              try
              {
                 c.method = parse_method(v);
              }
              catch (const std::exception &e)
              {
                 throw ConfigError(e.what());
              }
           }},
          {"seed", [](RunConfig &c, const std::string &k, const std::string &v)
           { c.seed = parse_value<std::uint64_t>(k, v); }},
          {"output_dir", [](RunConfig &c, const std::string &, const std::string &v)
           { c.output_dir = v; }},
       }},
      {"engine",
       {
          {"eps_cov", set_num(&AccBoedConfig::eps_cov)},
          {"use_filter", set_flag(&AccBoedConfig::use_filter)},
          {"n_z", set_num(&AccBoedConfig::n_z)},
          {"n_d", set_num(&AccBoedConfig::n_d)},
          {"big_n_z", set_num(&AccBoedConfig::big_n_z)},
          {"n_y", set_num(&AccBoedConfig::n_y)},
          {"grid_per_axis", set_num(&AccBoedConfig::grid_per_axis)},
          {"max_iterations", set_num(&AccBoedConfig::max_iterations)},
          {"enable_stopping", set_flag(&AccBoedConfig::enable_stopping)},
          {"normalize_ratio", set_flag(&AccBoedConfig::normalize_ratio)},
          {"standardize_targets", set_flag(&AccBoedConfig::standardize_targets)},
          {"posterior_samples", set_num(&AccBoedConfig::posterior_samples)},
          {"exec",
           [](RunConfig &c, const std::string &k, const std::string &v)
           {
              if (v == "serial") { c.engine.exec = Exec::Serial; }
              else if (v == "parallel") { c.engine.exec = Exec::Parallel; }
              else { throw ConfigError("bad value for " + k + ": '" + v + "'"); }
           }},
       }},
      {"mcmc",
       {
          {"burn_in", set_mcmc(&McmcConfig::burn_in)},
          {"proposal_scale", set_mcmc(&McmcConfig::proposal_scale)},
          {"n_chains", set_mcmc(&McmcConfig::n_chains)},
          {"thin", set_mcmc(&McmcConfig::thin)},
       }},
      {"kmn",
       {
          {"hidden_sizes", [](RunConfig &c, const std::string &k, const std::string &v)
           { c.engine.kmn.hidden_sizes = parse_list<int>(k, v); }},
          {"bandwidths", [](RunConfig &c, const std::string &k, const std::string &v)
           { c.engine.kmn.bandwidths = parse_list<double>(k, v); }},
          {"n_centers", set_kmn(&KmnConfig::n_centers)},
          {"learning_rate", set_kmn(&KmnConfig::learning_rate)},
          {"momentum", set_kmn(&KmnConfig::momentum)},
          {"epochs", set_kmn(&KmnConfig::epochs)},
          {"batch_size", set_kmn(&KmnConfig::batch_size)},
       }},
   };
   return table;
}

json config_json(const RunConfig &c)
{
   const AccBoedConfig &e = c.engine;
   return json{
      {"run",
       {{"problem", c.problem},
        {"method", method_name(c.method)},
        {"seed", c.seed},
        {"output_dir", c.output_dir.string()}}},
      {"engine",
       {{"eps_cov", e.eps_cov},
        {"use_filter", e.use_filter},
        {"n_z", e.n_z},
        {"n_d", e.n_d},
        {"big_n_z", e.big_n_z},
        {"n_y", e.n_y},
        {"grid_per_axis", e.grid_per_axis},
        {"max_iterations", e.max_iterations},
        {"enable_stopping", e.enable_stopping},
        {"normalize_ratio", e.normalize_ratio},
        {"standardize_targets", e.standardize_targets},
        {"posterior_samples", e.posterior_samples},
        {"exec", e.exec == Exec::Serial ? "serial" : "parallel"}}},
      {"mcmc",
       {{"burn_in", e.mcmc.burn_in},
        {"proposal_scale", e.mcmc.proposal_scale},
        {"n_chains", e.mcmc.n_chains},
        {"thin", e.mcmc.thin}}},
      {"kmn",
       {{"hidden_sizes", e.kmn.hidden_sizes},
        {"bandwidths", e.kmn.bandwidths},
        {"n_centers", e.kmn.n_centers},
        {"learning_rate", e.kmn.learning_rate},
        {"momentum", e.kmn.momentum},
        {"epochs", e.kmn.epochs},
        {"batch_size", e.kmn.batch_size}}},
   };
}

// NaN and inf are not JSON numbers.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path &path, const std::string &text)
{
   std::ofstream out(path, std::ios::binary);
   if (!out) { throw std::runtime_error("cannot write " + path.string()); }
   out << text;
}

void prepare_output_dir(const fs::path &dir)
{
   std::error_code ec;
   fs::create_directories(dir, ec);
   if (ec || !fs::is_directory(dir))
   {
      throw ConfigError("output_dir not writable: " + dir.string());
   }
}

void write_failure_summary(const RunConfig &c, const std::string &error, int code)
{
   try
   {
      prepare_output_dir(c.output_dir);
      json s{{"ok", false}, {"error", error}, {"exit_code", code}, {"config", config_json(c)}};
      write_text(c.output_dir / "summary.json", s.dump(2) + "\n");
   }
   catch (const std::exception &)
   {
      // Nowhere to report; the exit code still carries the failure.
   }
}

std::optional<double> relative_error(const ProblemSpec &p, double metric)
{
   if (!p.ground_truth || *p.ground_truth == 0.0) { return std::nullopt; }
   return std::abs(metric - *p.ground_truth) / *p.ground_truth;
}

json run_summary(const RunConfig &c, const ProblemSpec &p, const RunResult &r)
{
   json s{{"ok", r.ok}, {"problem", r.problem}, {"method", method_name(r.method)},
          {"seed", c.seed}, {"config", config_json(c)}};
   if (!r.ok) { s["error"] = r.error; }
   if (!r.records.empty())
   {
      const RunRecord &last = r.records.back();
      double t_total = 0.0;
      double t_utility = 0.0;
      for (const auto &rec : r.records)
      {
         t_total += rec.wall_time_total;
         t_utility += rec.wall_time_utility;
      }
      s["metric_name"] = last.metric_name;
      s["final_metric"] = number_or_null(last.metric_value);
      s["initial_metric"] = number_or_null(r.records.front().metric_value);
      s["dataset_size"] = last.dataset_size;
      s["iterations"] = static_cast<int>(r.records.size()) - 1;
      s["t_total_s"] = t_total;
      s["t_utility_s"] = t_utility;
      if (p.ground_truth)
      {
         s["ground_truth"] = *p.ground_truth;
         if (auto rel = relative_error(p, last.metric_value)) { s["relative_error"] = *rel; }
      }
   }
   s["kernel"] = {{"signal_variance", r.kernel.signal_variance},
                  {"lengthscale", r.kernel.lengthscale},
                  {"noise_variance", r.noise_variance}};
   return s;
}

void write_matrix_csv(const Matrix &m, const std::string &prefix, std::ostream &out)
{
   const auto prec = out.precision(17);
   for (int j = 0; j < m.cols(); ++j) { out << (j ? "," : "") << prefix << j; }
   out << '\n';
   for (int i = 0; i < m.rows(); ++i)
   {
      for (int j = 0; j < m.cols(); ++j) { out << (j ? "," : "") << m(i, j); }
      out << '\n';
   }
   out.precision(prec);
}

RunConfig checked_config(const fs::path &path)
{
   RunConfig c = load_config(path);
   make_problem(c.problem);  // throws "unknown problem: ..."
   c.engine.validate();
   return c;
}

}  // namespace

RunConfig parse_config(std::istream &in)
{
   namespace pt = boost::property_tree;
   pt::ptree tree;
   try
   {
      pt::read_ini(in, tree);
   }
   catch (const pt::ini_parser_error &e)
   {
      throw ConfigError(std::string("config parse error: ") + e.message());
   }
   RunConfig c;
   const auto &table = setters();
   for (const auto &[section, body] : tree)
   {
      const auto sec = table.find(section);
      if (sec == table.end() || body.empty())
      {
         throw ConfigError("unknown config section: " + section);
      }
      for (const auto &[key, node] : body)
      {
         const auto it = sec->second.find(key);
         if (it == sec->second.end())
         {
            throw ConfigError("unknown config key: " + section + "." + key);
         }
         it->second(c, section + "." + key, node.get_value<std::string>());
      }
   }
   if (c.problem.empty()) { throw ConfigError("missing run.problem"); }
   c.engine.seed = c.seed;
   return c;
}

RunConfig load_config(const fs::path &path)
{
   std::ifstream in(path);
   if (!in) { throw ConfigError("cannot read config: " + path.string()); }
   return parse_config(in);
}

int cmd_run(const fs::path &config, std::ostream &log)
{
   RunConfig c;
   try
   {
      c = load_config(config);
   }
   catch (const ConfigError &e)
   {
      log << "error: " << e.what() << '\n';
      return kExitConfig;
   }
   ProblemSpec problem;
   try
   {
      problem = make_problem(c.problem);
      c.engine.validate();
      prepare_output_dir(c.output_dir);
   }
   catch (const std::exception &e)
   {
      log << "error: " << e.what() << '\n';
      write_failure_summary(c, e.what(), kExitConfig);
      return kExitConfig;
   }

   try
   {
      const RunResult r = run_method(problem, c.engine, c.method);
      std::ostringstream csv;
      write_records_csv(r.records, problem.domain.dim(), csv);
      write_text(c.output_dir / "records.csv", csv.str());
      if (problem.metric == MetricKind::PosteriorKl && r.final_posterior.size() > 0)
      {
         std::ostringstream post;
         write_matrix_csv(r.final_posterior, "theta_", post);
         write_text(c.output_dir / "posterior_samples.csv", post.str());
      }
      json s = run_summary(c, problem, r);
      if (!r.ok) { s["exit_code"] = kExitRuntime; }
      write_text(c.output_dir / "summary.json", s.dump(2) + "\n");
      if (!r.ok)
      {
         log << "error: " << r.error << '\n';
         return kExitRuntime;
      }
      log << problem.name << ' ' << method_name(c.method) << " seed " << c.seed << ": "
          << r.records.back().metric_name << " = " << r.records.back().metric_value << " at "
          << r.records.back().dataset_size << " points\n";
      return kExitOk;
   }
   catch (const std::exception &e)
   {
      log << "error: " << e.what() << '\n';
      write_failure_summary(c, e.what(), kExitRuntime);
      return kExitRuntime;
   }
}

int cmd_compare(const std::vector<fs::path> &configs, const fs::path &report, std::ostream &log)
{
   if (configs.empty())
   {
      log << "error: compare needs at least one config\n";
      return kExitConfig;
   }
   std::vector<RunConfig> runs;
   try
   {
      for (const auto &path : configs) { runs.push_back(checked_config(path)); }
   }
   catch (const std::exception &e)
   {
      log << "error: " << e.what() << '\n';
      return kExitConfig;
   }
   for (const auto &r : runs)
   {
      if (r.problem != runs.front().problem)
      {
         log << "error: mismatched problems: " << runs.front().problem << " vs " << r.problem
             << '\n';
         return kExitConfig;
      }
   }

   std::vector<json> summaries;
   for (std::size_t i = 0; i < runs.size(); ++i)
   {
      // Reuse a finished run when its summary echoes the same configuration.
      const fs::path summary_path = runs[i].output_dir / "summary.json";
      json s;
      if (std::ifstream in(summary_path); in)
      {
         try
         {
            s = json::parse(in);
         }
         catch (const json::exception &)
         {
            s = json();
         }
      }
      if (!(s.is_object() && s.value("ok", false) && s["config"] == config_json(runs[i])))
      {
         const int code = cmd_run(configs[i], log);
         if (code != kExitOk) { return code; }
         std::ifstream in(summary_path);
         s = json::parse(in);
      }
      summaries.push_back(std::move(s));
   }

   try
   {
      std::ostringstream table;
      table.precision(17);
      table << "problem,method,seed,dataset_size,metric_name,final_metric,ground_truth,"
               "relative_error\n";
      for (const auto &s : summaries)
      {
         table << s["problem"].get<std::string>() << ',' << s["method"].get<std::string>() << ','
               << s["seed"].get<std::uint64_t>() << ',' << s["dataset_size"].get<int>() << ','
               << s["metric_name"].get<std::string>() << ',';
         if (!s["final_metric"].is_null()) { table << s["final_metric"].get<double>(); }
         table << ',';
         if (s.contains("ground_truth")) { table << s["ground_truth"].get<double>(); }
         table << ',';
         if (s.contains("relative_error")) { table << s["relative_error"].get<double>(); }
         table << '\n';
      }
      if (report.has_parent_path()) { fs::create_directories(report.parent_path()); }
      write_text(report, table.str());

      std::ostringstream timing;
      timing.precision(17);
      timing << "method,seed,t_utility_s,t_total_s\n";
      for (const auto &s : summaries)
      {
         timing << s["method"].get<std::string>() << ',' << s["seed"].get<std::uint64_t>() << ','
                << s["t_utility_s"].get<double>() << ',' << s["t_total_s"].get<double>() << '\n';
      }
      fs::path timing_path = report;
      timing_path.replace_filename(report.stem().string() + "_timing.csv");
      write_text(timing_path, timing.str());
      log << "wrote " << report.string() << " and " << timing_path.string() << '\n';
      return kExitOk;
   }
   catch (const std::exception &e)
   {
      log << "error: " << e.what() << '\n';
      return kExitRuntime;
   }
}

int cmd_bench_timing(const fs::path &config, std::ostream &log)
{
   RunConfig c;
   ProblemSpec problem;
   try
   {
      c = checked_config(config);
      problem = make_problem(c.problem);
      prepare_output_dir(c.output_dir);
   }
   catch (const std::exception &e)
   {
      log << "error: " << e.what() << '\n';
      return kExitConfig;
   }
   try
   {
      const FrozenState st = frozen_state(problem, c.engine);
      const auto t0 = Clock::now();
      const DesignChoice acc = select_design(st.gp, st.candidates, st.pool, c.engine,
                                             Method::AccBoed, 1);
      const double t_acc = std::chrono::duration<double>(Clock::now() - t0).count();
      const auto t1 = Clock::now();
      const DesignChoice basic = select_design(st.gp, st.candidates, st.pool, c.engine,
                                               Method::BasicBoed, 1);
      const double t_basic = std::chrono::duration<double>(Clock::now() - t1).count();

      json j{{"problem", problem.name},
             {"seed", c.seed},
             {"n_train", st.gp.data().size()},
             {"n_candidates", st.candidates.rows()},
             {"acc_index", acc.index},
             {"basic_index", basic.index},
             {"t_acc_sweep_s", acc.t_sweep_s},
             {"t_acc_total_s", t_acc},
             {"t_acc_cde_s", acc.t_cde_s},
             {"t_acc_train_s", acc.t_train_s},
             {"t_basic_sweep_s", basic.t_sweep_s},
             {"t_basic_total_s", t_basic},
             {"ratio", number_or_null(basic.t_sweep_s / acc.t_sweep_s)},
             {"ratio_total", number_or_null(t_basic / t_acc)},
             {"config", config_json(c)}};
      write_text(c.output_dir / "timing.json", j.dump(2) + "\n");
      std::ostringstream csv;
      csv.precision(17);
      csv << "problem,n_train,n_candidates,t_basic_s,t_acc_s,ratio,t_basic_total_s,"
             "t_acc_total_s,ratio_total\n"
          << problem.name << ',' << st.gp.data().size() << ',' << st.candidates.rows() << ','
          << basic.t_sweep_s << ',' << acc.t_sweep_s << ',' << basic.t_sweep_s / acc.t_sweep_s
          << ',' << t_basic << ',' << t_acc << ',' << t_basic / t_acc << '\n';
      write_text(c.output_dir / "timing.csv", csv.str());
      log << problem.name << ": basic " << basic.t_sweep_s << " s, acc " << acc.t_sweep_s
          << " s, ratio " << basic.t_sweep_s / acc.t_sweep_s << " (with CDE and training "
          << t_basic / t_acc << ")\n";
      return kExitOk;
   }
   catch (const std::exception &e)
   {
      log << "error: " << e.what() << '\n';
      return kExitRuntime;
   }
}

int cmd_list_problems(std::ostream &out)
{
   for (const auto &name : problem_names())
   {
      const ProblemSpec p = make_problem(name);
      out << name << "  dim=" << p.domain.dim() << " metric=" << metric_name(p.metric)
          << " n_initial=" << p.n_initial << " iterations=" << p.iterations << '\n';
   }
   return kExitOk;
}

int main_entry(int argc, char **argv)
{
   configure_threads();
   CLI::App app{"Accelerated Bayesian optimal experimental design"};
   app.require_subcommand(1);

   std::string run_config;
   auto *run = app.add_subcommand("run", "Run one configured experiment");
   run->add_option("config", run_config, "INI config file")->required();

   std::vector<std::string> compare_configs;
   std::string report = "compare.csv";
   auto *compare = app.add_subcommand("compare", "Join several runs into a comparison table");
   compare->add_option("configs", compare_configs, "INI config files")->required();
   compare->add_option("-o,--report", report, "Comparison CSV path");

   std::string timing_config;
   auto *timing = app.add_subcommand("bench-timing", "Time one acc vs basic selection step");
   timing->add_option("config", timing_config, "INI config file")->required();

   auto *list = app.add_subcommand("list-problems", "List built-in benchmarks");

   try
   {
      app.parse(argc, argv);
   }
   catch (const CLI::ParseError &e)
   {
      const int code = app.exit(e);
      return code == 0 ? kExitOk : kExitConfig;
   }

   if (*run) { return cmd_run(run_config, std::cerr); }
   if (*compare)
   {
      std::vector<fs::path> paths(compare_configs.begin(), compare_configs.end());
      return cmd_compare(paths, report, std::cerr);
   }
   if (*timing) { return cmd_bench_timing(timing_config, std::cerr); }
   if (*list) { return cmd_list_problems(std::cout); }
   return kExitConfig;
}

}  // namespace accboed::cli
