#include "misclass/workflow.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <memory>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "misclass/error.hpp"
#include "misclass/posterior.hpp"
#include "misclass/simgen.hpp"

namespace misclass {

namespace {

using Json = nlohmann::ordered_json;

std::string lower_case(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

double to_real(std::string_view key, std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw InputError("config key '" + std::string(key) + "': expected a number, got '" +
                     std::string(s) + "'");
  return v;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view s) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("config key '" + std::string(key) + "': expected an integer, got '" +
                     std::string(s) + "'");
  return v;
}

bool to_bool(std::string_view key, std::string_view s) {
  const std::string v = lower_case(s);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InputError("config key '" + std::string(key) + "': expected true or false");
}

// Shortest text that reads back to the same double.
std::string exact(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fixed(double v, int digits = 6) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fixed(const std::optional<double>& v, int digits = 6) {
  return v ? fixed(*v, digits) : "NA";
}

std::string clean_field(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first failure in
// index order is rethrown after all jobs finish.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Stable index of a cell in the full grid, independent of which cells a run
// selects; the uncorrected cell comes last.
std::uint64_t canonical_cell_index(const GridCell& cell) {
  if (!cell.r_ctrl) return 9;
  return static_cast<std::uint64_t>(*cell.r_ctrl) * 3 + static_cast<std::uint64_t>(*cell.r_trt);
}

std::string cell_slug(const GridCell& cell) {
  std::string s = cell.label;
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

struct CellPriors {
  std::vector<RatePriorTriple> site_priors;  // input order
  std::vector<std::string> warnings;
  // Distinct (group, arm) elicitations in first-seen order.
  std::vector<std::tuple<std::string, int, ElicitationSpec, ElicitedPrior>> fitted;
};

CellPriors cell_priors(const GridCell& cell, const SiteTable& table, const RegistryTable* registry) {
  CellPriors out;
  std::vector<ElicitationSpec> specs;
  if (cell.r_ctrl) {
    if (!registry) throw InputError("grid cell " + cell.label + " needs a registry_file");
    specs = build_grid_priors(*registry, table.sites, *cell.r_ctrl, *cell.r_trt);
  }
  std::set<std::string> seen_warnings;
  for (std::size_t i = 0; i < table.sites.size(); ++i) {
    RatePriorTriple triple{RatePrior::fixed(0.0), RatePrior::fixed(table.rho2[i]),
                           RatePrior::fixed(table.rho3[i])};
    if (cell.r_ctrl) {
      const SiteRecord& site = table.sites[i];
      const std::string& group = site.group_path.front();
      auto it = std::find_if(out.fitted.begin(), out.fitted.end(), [&](const auto& f) {
        return std::get<0>(f) == group && std::get<1>(f) == site.arm && std::get<2>(f) == specs[i];
      });
      if (it == out.fitted.end()) {
        ElicitedPrior prior;
        try {
          prior = elicit_prior(specs[i]);
        } catch (const ElicitationInfeasibleError& e) {
          throw ElicitationInfeasibleError("group " + group + ": " + e.what(), e.best_residual());
        }
        for (const auto& w : prior.warnings) {
          const std::string msg = "group " + group + " arm " + std::to_string(site.arm) + ": " + w;
          if (seen_warnings.insert(msg).second) out.warnings.push_back(msg);
        }
        out.fitted.emplace_back(group, site.arm, specs[i], prior);
        it = std::prev(out.fitted.end());
      }
      triple.outcome = RatePrior::elicited(std::get<3>(*it));
    }
    out.site_priors.push_back(std::move(triple));
  }
  return out;
}

std::unique_ptr<RegistryTable> maybe_registry(const RunConfig& config) {
  if (config.registry_file.empty()) return nullptr;
  return std::make_unique<RegistryTable>(read_registry_file(config.registry_file));
}

void require_site_file(const RunConfig& config) {
  if (config.site_file.empty()) throw InputError("config needs site_file for this mode");
}

std::filesystem::path prepare_output_dir(const RunConfig& config) {
  std::filesystem::path dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + config.output_dir + "': " + ec.message());
  return dir;
}

void write_outputs(const std::filesystem::path& dir,
                   const std::vector<std::pair<std::string, std::string>>& files, RunReport& report) {
  for (const auto& [name, text] : files) {
    const std::string path = (dir / name).string();
    write_text_file(path, text);
    report.files.push_back(path);
  }
}

// ---------------------------------------------------------------- analyze

RunReport run_analyze(const RunConfig& config) {
  require_site_file(config);
  const SiteTable table = read_site_file(config.site_file);
  const auto registry = maybe_registry(config);
  const std::vector<GridCell> cells = parse_grid(config.grid);
  const std::string hash = config_hash(config);

  DesignSpec design;
  design.group_levels = config.group_levels;
  design.covariate_names = table.covariate_names;
  build_design(table.sites, design);  // validates before any chain starts

  std::vector<CellPriors> priors;
  for (const auto& cell : cells) priors.push_back(cell_priors(cell, table, registry.get()));

  PriorConfig prior_config{config.fixed_effect_variance, config.variance_shape, config.variance_rate};
  const std::size_t chains = static_cast<std::size_t>(config.chains);
  std::vector<ChainOutput> outputs(cells.size() * chains);
  parallel_for(outputs.size(), config.threads, [&](std::size_t job) {
    const std::size_t c = job / chains;
    const std::size_t k = job % chains;
    const RandomStream stream =
        RandomStream(config.seed).split(canonical_cell_index(cells[c])).split(k);
    ChainConfig chain;
    chain.iterations = config.iterations;
    chain.burn_in = config.burn_in;
    chain.seed = stream.seed();
    chain.stream_id = stream.stream_id();
    chain.sharing = config.rate_sharing;
    chain.refresh = config.rate_refresh;
    chain.keep_site_draws = false;
    outputs[job] = run_chain(table.sites, design, priors[c].site_priors, prior_config, chain);
  });

  std::vector<double> thresholds = {1.0};
  if (config.reference_or) thresholds.push_back(*config.reference_or);

  std::ostringstream summary;
  summary << "cell\tr_ctrl\tr_trt\tor\tcri_lower\tcri_upper\tor_mean\tprob_gt_null\t"
             "prob_gt_reference\treference_or\tdraws\tess\tpsrf\tjitter_events\tseed\tconfig_hash\n";
  std::ostringstream diag;
  std::vector<std::pair<std::string, std::string>> files;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::span<const ChainOutput> cell_chains(outputs.data() + c * chains, chains);
    const PosteriorSummary s = summarize_or(cell_chains, DesignSet::kArmColumn, thresholds);
    std::size_t jitter = 0;
    for (const auto& ch : cell_chains) jitter += ch.jitter_events;
    const GridCell& cell = cells[c];
    summary << cell.label << '\t' << (cell.r_ctrl ? r_label(*cell.r_ctrl) : "NA") << '\t'
            << (cell.r_trt ? r_label(*cell.r_trt) : "NA") << '\t' << fixed(s.or_median) << '\t'
            << fixed(s.cri_lower) << '\t' << fixed(s.cri_upper) << '\t' << fixed(s.or_mean) << '\t'
            << fixed(s.tail_probs[0].second) << '\t'
            << (config.reference_or ? fixed(s.tail_probs[1].second) : "NA") << '\t'
            << fixed(config.reference_or) << '\t' << s.draws << '\t' << fixed(s.ess, 1) << '\t'
            << fixed(s.psrf, 4) << '\t' << jitter << '\t' << config.seed << '\t' << hash << '\n';

    for (std::size_t k = 0; k < chains; ++k) {
      const ChainOutput& ch = cell_chains[k];
      Json rec;
      rec["cell"] = cell.label;
      rec["chain"] = k;
      rec["seed"] = ch.seed;
      rec["stream_id"] = ch.stream_id;
      rec["iterations"] = ch.iterations;
      rec["burn_in"] = ch.burn_in;
      rec["draws"] = ch.draws.size();
      try {
        rec["ess_arm"] = effective_sample_size(ch.trace(DesignSet::kArmColumn));
      } catch (const DomainError&) {
        rec["ess_arm"] = nullptr;
      }
      rec["psrf_arm"] = s.psrf ? Json(*s.psrf) : Json(nullptr);
      rec["jitter_events"] = ch.jitter_events;
      rec["warnings"] = priors[c].warnings;
      rec["config_hash"] = hash;
      diag << rec.dump() << '\n';
    }

    if (config.dump_draws) {
      std::ostringstream dump;
      const auto& names = cell_chains.front().coefficient_names;
      dump << "chain\tdraw";
      for (const auto& n : names) dump << '\t' << n;
      for (Eigen::Index v = 0; v < cell_chains.front().draws.front().variances.size(); ++v)
        dump << "\tvariance" << (v + 1);
      dump << '\n';
      for (std::size_t k = 0; k < chains; ++k)
        for (std::size_t d = 0; d < cell_chains[k].draws.size(); ++d) {
          const ChainDraw& draw = cell_chains[k].draws[d];
          dump << k << '\t' << d;
          for (Eigen::Index j = 0; j < draw.coefficients.size(); ++j)
            dump << '\t' << exact(draw.coefficients(j));
          for (Eigen::Index j = 0; j < draw.variances.size(); ++j)
            dump << '\t' << exact(draw.variances(j));
          dump << '\n';
        }
      files.emplace_back("draws_" + cell_slug(cell) + ".tsv", dump.str());
    }
  }
  files.insert(files.begin(), {"diagnostics.jsonl", diag.str()});
  files.insert(files.begin(), {"summary.tsv", summary.str()});

  RunReport report;
  write_outputs(prepare_output_dir(config), files, report);
  return report;
}

// --------------------------------------------------------------- simulate

RunReport run_simulate(const RunConfig& config) {
  const std::string hash = config_hash(config);
  std::vector<ModelSpec> specs;
  if (config.model_specs == "all") {
    specs = builtin_model_specs();
  } else {
    for (const auto& label : split_list(config.model_specs)) specs.push_back(find_model_spec(label));
  }
  std::vector<std::int64_t> sizes;
  if (!config.site_sizes_file.empty()) sizes = read_size_file(config.site_sizes_file);

  std::ostringstream metrics;
  metrics << "scenario\tspec\ttrue_or\tmean_bias_log_or\tcoverage_95\tmean_half_width\t"
             "rate_bias_ctrl\trate_bias_trt\tsuccesses\tfailures\tseed\tconfig_hash\n";
  std::ostringstream reps;
  reps << "scenario\tspec\treplication\tok\tbias_log_or\tcovered\thalf_width\trate_bias_ctrl\t"
          "rate_bias_trt\tmessage\n";
  for (const auto& name : config.scenarios) {
    ScenarioSpec scenario = builtin_scenario(name, config.n_obs_seed.value_or(config.seed));
    if (!sizes.empty()) {
      if (sizes.size() != scenario.num_sites())
        throw InputError("site_sizes_file has " + std::to_string(sizes.size()) + " sizes, scenario needs " +
                         std::to_string(scenario.num_sites()));
      scenario.n_obs = sizes;
    }
    MonteCarloConfig mc;
    mc.replications = config.replications;
    mc.iterations = config.iterations;
    mc.burn_in = config.burn_in;
    mc.seed = config.seed;
    mc.threads = config.threads;
    const auto results = run_monte_carlo(scenario, specs, mc);
    for (const auto& m : results) {
      metrics << name << '\t' << m.label << '\t' << fixed(std::exp(m.true_log_or)) << '\t'
              << fixed(m.mean_bias_log_or) << '\t' << fixed(m.coverage_95) << '\t'
              << fixed(m.mean_half_width) << '\t' << fixed(m.rate_bias[0]) << '\t'
              << fixed(m.rate_bias[1]) << '\t' << m.successes << '\t' << m.failures << '\t'
              << config.seed << '\t' << hash << '\n';
      for (std::size_t r = 0; r < m.replications.size(); ++r) {
        const ReplicationResult& res = m.replications[r];
        reps << name << '\t' << m.label << '\t' << r << '\t' << (res.ok ? 1 : 0) << '\t'
             << (res.ok ? fixed(res.bias_log_or) : "NA") << '\t'
             << (res.ok ? (res.covered ? "1" : "0") : "NA") << '\t'
             << (res.ok ? fixed(res.half_width) : "NA") << '\t'
             << (res.ok ? fixed(res.rate_bias[0]) : "NA") << '\t'
             << (res.ok ? fixed(res.rate_bias[1]) : "NA") << '\t'
             << (res.message.empty() ? "NA" : clean_field(res.message)) << '\n';
      }
    }
  }
  RunReport report;
  write_outputs(prepare_output_dir(config),
                {{"metrics.tsv", metrics.str()}, {"replications.tsv", reps.str()}}, report);
  return report;
}

// ------------------------------------------------------------ elicit-only

struct DeltaSummary {
  std::int64_t support_min = 0, support_max = 0, mode = 0;
  double mean = 0.0;
  std::int64_t q05 = 0, q95 = 0;
};

DeltaSummary summarize_delta(const std::vector<double>& pmf) {
  DeltaSummary s;
  const auto nonzero = [](double p) { return p > 0.0; };
  s.support_min = std::find_if(pmf.begin(), pmf.end(), nonzero) - pmf.begin();
  s.support_max = static_cast<std::int64_t>(pmf.rend() - std::find_if(pmf.rbegin(), pmf.rend(), nonzero)) - 1;
  s.mode = std::max_element(pmf.begin(), pmf.end()) - pmf.begin();
  double cumulative = 0.0;
  bool have05 = false, have95 = false;
  s.q95 = s.support_max;
  for (std::size_t d = 0; d < pmf.size(); ++d) {
    s.mean += pmf[d] * static_cast<double>(d);
    cumulative += pmf[d];
    if (!have05 && cumulative >= 0.05) {
      s.q05 = static_cast<std::int64_t>(d);
      have05 = true;
    }
    if (!have95 && cumulative >= 0.95) {
      s.q95 = static_cast<std::int64_t>(d);
      have95 = true;
    }
  }
  return s;
}

RunReport run_elicit_only(const RunConfig& config) {
  const std::string hash = config_hash(config);
  const auto registry = maybe_registry(config);
  std::optional<SiteTable> table;
  if (!config.site_file.empty()) table = read_site_file(config.site_file);
  if (registry && !table) throw InputError("grid elicitation needs site_file for the arm assignment");

  std::ostringstream priors;
  priors << "source\tcell\tname\tarm\tmode\tkappa_low\tp_low\tkappa_high\tp_high\tlower\tupper\t"
            "gamma\tlambda\tresidual\tboundary\twarnings\tseed\tconfig_hash\n";
  std::ostringstream delta;
  delta << "source\tcell\tname\tcount\tsupport_min\tsupport_max\tdelta_mode\tdelta_mean\t"
           "delta_q05\tdelta_q95\tseed\tconfig_hash\n";
  std::ostringstream pmf_out;
  pmf_out << "name\tdelta\tprobability\n";

  const auto prior_row = [&](std::string_view source, std::string_view cell, std::string_view name,
                             std::string_view arm, const ElicitationSpec& spec, const ElicitedPrior& p) {
    std::vector<std::string> warnings;
    for (const auto& w : p.warnings) warnings.push_back(clean_field(w));
    priors << source << '\t' << cell << '\t' << name << '\t' << arm << '\t' << fixed(spec.mode) << '\t'
           << fixed(spec.low.value) << '\t' << fixed(spec.low.probability) << '\t'
           << fixed(spec.high.value) << '\t' << fixed(spec.high.probability) << '\t'
           << fixed(spec.lower) << '\t' << fixed(spec.upper) << '\t' << fixed(p.shape1, 8) << '\t'
           << fixed(p.shape2, 8) << '\t' << exact(p.residual) << '\t'
           << (p.at_search_boundary ? 1 : 0) << '\t'
           << (warnings.empty() ? "NA" : join(warnings, "; ")) << '\t' << config.seed << '\t' << hash
           << '\n';
  };
  const auto delta_row = [&](std::string_view source, std::string_view cell, std::string_view name,
                             std::int64_t count, const std::vector<double>& pmf) {
    const DeltaSummary s = summarize_delta(pmf);
    delta << source << '\t' << cell << '\t' << name << '\t' << count << '\t' << s.support_min << '\t'
          << s.support_max << '\t' << s.mode << '\t' << fixed(s.mean, 4) << '\t' << s.q05 << '\t'
          << s.q95 << '\t' << config.seed << '\t' << hash << '\n';
  };

  if (registry) {
    for (const auto& cell : parse_grid(config.grid)) {
      if (!cell.r_ctrl) continue;
      const CellPriors cp = cell_priors(cell, *table, registry.get());
      for (const auto& [group, arm, spec, prior] : cp.fitted)
        prior_row("grid", cell.label, group, std::to_string(arm), spec, prior);
      for (std::size_t i = 0; i < table->sites.size(); ++i) {
        const SiteRecord& site = table->sites[i];
        const std::int64_t count = site.n_obs - site.y_obs;
        if (count < 0) throw InputError("site " + site.site_id + " has y_obs > n_obs");
        delta_row("grid", cell.label, site.site_id, count,
                  induced_delta_pmf(*cp.site_priors[i].outcome.elicited_prior(), count));
      }
    }
  }
  for (const auto& [name, custom] : config.priors) {
    const ElicitedPrior p = elicit_prior(custom.spec);
    prior_row("custom", "NA", name, "NA", custom.spec, p);
    if (custom.count > 0) {
      const auto pmf = induced_delta_pmf(p, custom.count);
      delta_row("custom", "NA", name, custom.count, pmf);
      for (std::size_t d = 0; d < pmf.size(); ++d)
        if (pmf[d] > 0.0) pmf_out << name << '\t' << d << '\t' << exact(pmf[d]) << '\n';
    }
  }
  RunReport report;
  write_outputs(prepare_output_dir(config),
                {{"priors.tsv", priors.str()}, {"delta.tsv", delta.str()}, {"delta_pmf.tsv", pmf_out.str()}},
                report);
  return report;
}

RunReport run_validate(const RunConfig& config) {
  const auto registry = maybe_registry(config);
  if (!config.site_file.empty()) {
    const SiteTable table = read_site_file(config.site_file);
    DesignSpec design;
    design.group_levels = config.group_levels;
    design.covariate_names = table.covariate_names;
    build_design(table.sites, design);
    for (const auto& cell : parse_grid(config.grid)) cell_priors(cell, table, registry.get());
  }
  for (const auto& [name, custom] : config.priors) elicit_prior(custom.spec);
  if (!config.site_sizes_file.empty()) read_size_file(config.site_sizes_file);
  for (const auto& name : config.scenarios) builtin_scenario(name, 0);
  if (config.model_specs != "all")
    for (const auto& label : split_list(config.model_specs)) find_model_spec(label);
  return {};
}

// ---------------------------------------------------------------- config

std::string priors_value(const CustomPrior& p) {
  const ElicitationSpec& s = p.spec;
  return join({exact(s.mode), exact(s.low.probability), exact(s.low.value), exact(s.high.probability),
               exact(s.high.value), exact(s.lower), exact(s.upper), std::to_string(p.count)},
              ",");
}

CustomPrior parse_custom_prior(std::string_view key, std::string_view value) {
  const auto parts = split_list(value);
  if (parts.size() != 7 && parts.size() != 8)
    throw InputError("config key '" + std::string(key) +
                     "': expected mode,p_low,kappa_low,p_high,kappa_high,lower,upper[,count]");
  CustomPrior p;
  p.spec.mode = to_real(key, parts[0]);
  p.spec.low = {to_real(key, parts[1]), to_real(key, parts[2])};
  p.spec.high = {to_real(key, parts[3]), to_real(key, parts[4])};
  p.spec.lower = to_real(key, parts[5]);
  p.spec.upper = to_real(key, parts[6]);
  if (parts.size() == 8) p.count = to_int<std::int64_t>(key, parts[7]);
  if (p.count < 0) throw InputError("config key '" + std::string(key) + "': count must be >= 0");
  return p;
}

}  // namespace

double r_value(RLevel level) noexcept {
  switch (level) {
    case RLevel::low: return 0.25;
    case RLevel::medium: return 0.50;
    case RLevel::high: return 0.66;
  }
  return 0.0;
}

std::string_view r_label(RLevel level) noexcept {
  switch (level) {
    case RLevel::low: return "Low";
    case RLevel::medium: return "Medium";
    case RLevel::high: return "High";
  }
  return "";
}

RLevel parse_r_level(std::string_view label) {
  const std::string l = lower_case(trim(label));
  if (l == "low") return RLevel::low;
  if (l == "medium") return RLevel::medium;
  if (l == "high") return RLevel::high;
  throw InputError("unknown r level '" + std::string(label) + "' (expected Low, Medium or High)");
}

double compute_rho_hat(double q1, double q2, double r) {
  for (double v : {q1, q2, r})
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("registry rates and r must lie in [0, 1]");
  const double rho = q1 + r * q2;
  if (rho > 1.0) throw DomainError("q1 + r q2 exceeds 1");
  return rho;
}

GroupRegistry resolve_group(const RegistryTable& registry, const std::string& group) {
  const auto it = registry.find(group);
  if (it == registry.end()) throw InputError("no registry estimates for group '" + group + "'");
  if (!it->second.impute) return it->second;
  GroupRegistry avg;
  std::size_t n = 0;
  for (const auto& [name, g] : registry) {
    if (g.impute) continue;
    avg.q1 += g.q1;
    avg.q2 += g.q2;
    ++n;
  }
  if (n == 0) throw InputError("group '" + group + "' is imputed but no group has estimates");
  avg.q1 /= static_cast<double>(n);
  avg.q2 /= static_cast<double>(n);
  return avg;
}

std::vector<ElicitationSpec> build_grid_priors(const RegistryTable& registry,
                                               std::span<const SiteRecord> sites, RLevel r_ctrl,
                                               RLevel r_trt) {
  std::vector<ElicitationSpec> specs;
  specs.reserve(sites.size());
  for (const auto& site : sites) {
    if (site.group_path.empty() || site.group_path.front().empty())
      throw InputError("site '" + site.site_id + "' has no group label");
    const GroupRegistry g = resolve_group(registry, site.group_path.front());
    const double mode = compute_rho_hat(g.q1, g.q2, r_value(site.arm == 1 ? r_trt : r_ctrl));
    ElicitationSpec spec;
    spec.mode = mode;
    spec.lower = g.q1;
    spec.upper = g.q1 + g.q2;
    // Anchors outside [lower, upper] are clamped (with a warning) at elicitation.
    spec.low = {0.05, mode - 0.01};
    spec.high = {0.95, mode + 0.01};
    specs.push_back(spec);
  }
  return specs;
}

std::vector<GridCell> parse_grid(std::string_view text) {
  const std::string t = lower_case(trim(text));
  std::vector<GridCell> cells;
  if (t == "all") {
    for (RLevel c : kRLevels)
      for (RLevel m : kRLevels)
        cells.push_back({std::string(r_label(c)) + "/" + std::string(r_label(m)), c, m});
    return cells;
  }
  if (t == "none") return {{"none", std::nullopt, std::nullopt}};
  const auto parts = split_list(text);
  if (parts.size() != 2) throw InputError("grid must be 'all', 'none' or 'LABEL,LABEL'");
  const RLevel c = parse_r_level(parts[0]);
  const RLevel m = parse_r_level(parts[1]);
  return {{std::string(r_label(c)) + "/" + std::string(r_label(m)), c, m}};
}

void RunConfig::validate() const {
  if (burn_in < 0 || iterations <= burn_in) throw InputError("config needs iterations > burn_in >= 0");
  if (chains < 1) throw InputError("config needs at least one chain per grid cell");
  if (threads < 1) throw InputError("config needs threads >= 1");
  if (replications < 1) throw InputError("config needs replications >= 1");
  if (!(fixed_effect_variance > 0.0) || !(variance_shape > 0.0) || !(variance_rate > 0.0))
    throw InputError("prior hyperparameters must be positive");
  if (reference_or && !(*reference_or > 0.0)) throw InputError("reference_or must be positive");
  parse_grid(grid);
  for (const std::string* s : {&site_file, &registry_file, &output_dir, &site_sizes_file, &model_specs})
    if (s->find('\n') != std::string::npos || trim(*s) != *s)
      throw InputError("config paths and labels must be single-line without surrounding spaces");
  if (scenarios.empty()) throw InputError("config needs at least one scenario");
  for (const auto& s : scenarios)
    if (s != "I" && s != "II" && s != "III") throw InputError("unknown scenario '" + s + "'");
  for (const auto& [name, p] : priors)
    if (name.empty() || name.find_first_of(" \t=") != std::string::npos)
      throw InputError("invalid prior name '" + name + "'");
}

void set_run_config_value(RunConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  if (key == "site_file") c.site_file = value;
  else if (key == "registry_file") c.registry_file = value;
  else if (key == "output_dir") c.output_dir = value;
  else if (key == "iterations") c.iterations = to_int<int>(key, value);
  else if (key == "burn_in") c.burn_in = to_int<int>(key, value);
  else if (key == "seed") c.seed = to_int<std::uint64_t>(key, value);
  else if (key == "chains") c.chains = to_int<int>(key, value);
  else if (key == "threads") c.threads = to_int<unsigned>(key, value);
  else if (key == "grid") c.grid = value;
  else if (key == "rate_sharing") {
    if (value == "site") c.rate_sharing = RateSharing::site;
    else if (value == "arm") c.rate_sharing = RateSharing::arm;
    else throw InputError("rate_sharing must be 'site' or 'arm'");
  } else if (key == "rate_refresh") {
    if (value == "every_sweep") c.rate_refresh = RateRefresh::every_sweep;
    else if (value == "once_per_chain") c.rate_refresh = RateRefresh::once_per_chain;
    else throw InputError("rate_refresh must be 'every_sweep' or 'once_per_chain'");
  } else if (key == "group_levels") c.group_levels = to_int<std::size_t>(key, value);
  else if (key == "fixed_effect_variance") c.fixed_effect_variance = to_real(key, value);
  else if (key == "variance_shape") c.variance_shape = to_real(key, value);
  else if (key == "variance_rate") c.variance_rate = to_real(key, value);
  else if (key == "reference_or") {
    if (value.empty() || value == "NA") c.reference_or.reset();
    else c.reference_or = to_real(key, value);
  } else if (key == "dump_draws") c.dump_draws = to_bool(key, value);
  else if (key == "scenarios") c.scenarios = split_list(value);
  else if (key == "model_specs") c.model_specs = value;
  else if (key == "replications") c.replications = to_int<std::size_t>(key, value);
  else if (key == "n_obs_seed") {
    if (value.empty()) c.n_obs_seed.reset();
    else c.n_obs_seed = to_int<std::uint64_t>(key, value);
  } else if (key == "site_sizes_file") c.site_sizes_file = value;
  else if (key.starts_with("prior.") && key.size() > 6) {
    c.priors[std::string(key.substr(6))] = parse_custom_prior(key, value);
  } else {
    throw InputError("unknown config key '" + std::string(key) + "'");
  }
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig config;
  std::set<std::string> seen;
  std::size_t number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    const auto line = trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    ++number;
    if (!line.empty() && line.front() != '#') {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw InputError("config line " + std::to_string(number) + ": expected key = value");
      const std::string key(trim(line.substr(0, eq)));
      if (!seen.insert(key).second)
        throw InputError("config line " + std::to_string(number) + ": duplicate key '" + key + "'");
      set_run_config_value(config, key, line.substr(eq + 1));
    }
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig config = parse_run_config(read_text_file(path));
  // Input paths are relative to the configuration file.
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (std::string* p : {&config.site_file, &config.registry_file, &config.site_sizes_file})
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  return config;
}

std::string serialize_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "site_file = " << c.site_file << '\n'
      << "registry_file = " << c.registry_file << '\n'
      << "output_dir = " << c.output_dir << '\n'
      << "iterations = " << c.iterations << '\n'
      << "burn_in = " << c.burn_in << '\n'
      << "seed = " << c.seed << '\n'
      << "chains = " << c.chains << '\n'
      << "threads = " << c.threads << '\n'
      << "grid = " << c.grid << '\n'
      << "rate_sharing = " << (c.rate_sharing == RateSharing::arm ? "arm" : "site") << '\n'
      << "rate_refresh = "
      << (c.rate_refresh == RateRefresh::once_per_chain ? "once_per_chain" : "every_sweep") << '\n'
      << "group_levels = " << c.group_levels << '\n'
      << "fixed_effect_variance = " << exact(c.fixed_effect_variance) << '\n'
      << "variance_shape = " << exact(c.variance_shape) << '\n'
      << "variance_rate = " << exact(c.variance_rate) << '\n'
      << "reference_or = " << (c.reference_or ? exact(*c.reference_or) : "NA") << '\n'
      << "dump_draws = " << (c.dump_draws ? "true" : "false") << '\n'
      << "scenarios = " << join(c.scenarios, ",") << '\n'
      << "model_specs = " << c.model_specs << '\n'
      << "replications = " << c.replications << '\n'
      << "n_obs_seed = " << (c.n_obs_seed ? std::to_string(*c.n_obs_seed) : "") << '\n'
      << "site_sizes_file = " << c.site_sizes_file << '\n';
  for (const auto& [name, p] : c.priors) out << "prior." << name << " = " << priors_value(p) << '\n';
  return out.str();
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  // Output location and worker count do not affect results, so they are left
  // out of the hash.
  RunConfig canonical = config;
  canonical.output_dir = ".";
  canonical.threads = 1;
  for (unsigned char ch : serialize_run_config(canonical)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunMode parse_run_mode(std::string_view text) {
  if (text == "analyze") return RunMode::analyze;
  if (text == "simulate") return RunMode::simulate;
  if (text == "elicit-only") return RunMode::elicit_only;
  if (text == "validate") return RunMode::validate;
  throw InputError("unknown mode '" + std::string(text) + "'");
}

RunReport run(const RunConfig& config, RunMode mode) {
  config.validate();
  switch (mode) {
    case RunMode::analyze: return run_analyze(config);
    case RunMode::simulate: return run_simulate(config);
    case RunMode::elicit_only: return run_elicit_only(config);
    case RunMode::validate: return run_validate(config);
  }
  throw InputError("unknown mode");
}

}  // namespace misclass
