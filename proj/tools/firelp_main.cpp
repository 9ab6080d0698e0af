// Command-line front end: config-driven runs of the estimation engine.
//
// Subcommands: synth (generate a synthetic panel), irf (impulse responses),
// cumulative (summed response), jackknife (county-block uncertainty for the
// cumulative effect), hei (historical impact series by region). Every run is
// a pure function of the config file, the flags, and the input files; output
// files are written atomically and repeated runs are byte-identical.
//
// Exit codes: 0 success, 1 data/estimation failure, 2 config/input failure.
// Failures print a single-line JSON object {"error": kind, "message": text}
// to stderr.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "firelp/design.hpp"
#include "firelp/hei.hpp"
#include "firelp/irf.hpp"
#include "firelp/panel.hpp"
#include "firelp/spatial.hpp"
#include "firelp/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace firelp;

namespace {

// ---------------------------------------------------------------------------
// Config access with precise error messages.

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config file '" + path + "'");
  json config;
  try {
    in >> config;
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!config.is_object()) fail(ErrorKind::config, "config root must be a JSON object");
  return config;
}

void check_keys(const json& node, std::initializer_list<const char*> allowed,
                const std::string& context) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) fail(ErrorKind::config, "unknown key '" + it.key() + "' in " + context);
  }
}

const json* find(const json& node, const char* key) {
  const auto it = node.find(key);
  return it == node.end() || it->is_null() ? nullptr : &*it;
}

double as_number(const json& value, const std::string& context) {
  if (!value.is_number()) fail(ErrorKind::config, context + " must be a number");
  return value.get<double>();
}

int as_int(const json& value, const std::string& context) {
  if (!value.is_number_integer()) fail(ErrorKind::config, context + " must be an integer");
  return value.get<int>();
}

bool as_bool(const json& value, const std::string& context) {
  if (!value.is_boolean()) fail(ErrorKind::config, context + " must be true or false");
  return value.get<bool>();
}

std::string as_string(const json& value, const std::string& context) {
  if (!value.is_string()) fail(ErrorKind::config, context + " must be a string");
  return value.get<std::string>();
}

std::vector<double> as_number_array(const json& value, const std::string& context) {
  if (!value.is_array()) fail(ErrorKind::config, context + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& v : value) out.push_back(as_number(v, context + " entry"));
  return out;
}

SeriesRef::Transform parse_transform(const json& value, const std::string& context) {
  const std::string name = as_string(value, context);
  if (name == "level") return SeriesRef::Transform::level;
  if (name == "log") return SeriesRef::Transform::log;
  fail(ErrorKind::config, context + " must be 'level' or 'log', got '" + name + "'");
}

// ---------------------------------------------------------------------------
// Config sections -> engine structs.

ModelSpec parse_model(const json* model) {
  ModelSpec spec;
  spec.outcome = SeriesRef{"employment", SeriesRef::Transform::log, 0};
  spec.shock = "burn_area";
  if (model == nullptr) return spec;
  check_keys(*model,
             {"outcome", "shock", "horizons", "shock_lags", "outcome_lags", "controls",
              "impulse_size", "ci_level", "fixed_effects", "state", "spatial",
              "clean_controls", "clean_control_window", "region_tag"},
             "model");
  if (const json* outcome = find(*model, "outcome")) {
    check_keys(*outcome, {"series", "transform"}, "model.outcome");
    if (const json* series = find(*outcome, "series")) {
      spec.outcome.series = as_string(*series, "model.outcome.series");
    }
    if (const json* transform = find(*outcome, "transform")) {
      spec.outcome.transform = parse_transform(*transform, "model.outcome.transform");
    }
  }
  if (const json* shock = find(*model, "shock")) spec.shock = as_string(*shock, "model.shock");
  if (const json* horizons = find(*model, "horizons")) {
    spec.horizons = as_int(*horizons, "model.horizons");
  }
  if (const json* lags = find(*model, "shock_lags")) {
    spec.shock_lags = as_int(*lags, "model.shock_lags");
  }
  if (const json* lags = find(*model, "outcome_lags")) {
    spec.outcome_lags = as_int(*lags, "model.outcome_lags");
  }
  if (const json* controls = find(*model, "controls")) {
    if (!controls->is_array()) fail(ErrorKind::config, "model.controls must be an array");
    for (const auto& entry : *controls) {
      check_keys(entry, {"series", "transform", "lag", "lags"}, "model.controls entry");
      const json* series = find(entry, "series");
      if (series == nullptr) fail(ErrorKind::config, "model.controls entry needs a series");
      SeriesRef ref;
      ref.series = as_string(*series, "model.controls series");
      if (const json* transform = find(entry, "transform")) {
        ref.transform = parse_transform(*transform, "model.controls transform");
      }
      const json* lag = find(entry, "lag");
      const json* lags = find(entry, "lags");
      if (lag != nullptr && lags != nullptr) {
        fail(ErrorKind::config, "model.controls entry takes 'lag' or 'lags', not both");
      }
      if (lags != nullptr) {
        const int count = as_int(*lags, "model.controls lags");
        if (count < 1) fail(ErrorKind::config, "model.controls lags must be positive");
        for (int j = 1; j <= count; ++j) {
          ref.lag = j;
          spec.controls.push_back(ref);
        }
      } else {
        ref.lag = lag != nullptr ? as_int(*lag, "model.controls lag") : 0;
        spec.controls.push_back(ref);
      }
    }
  }
  if (const json* impulse = find(*model, "impulse_size")) {
    spec.impulse_size = as_number(*impulse, "model.impulse_size");
  }
  if (const json* level = find(*model, "ci_level")) {
    spec.ci_level = as_number(*level, "model.ci_level");
  }
  if (const json* effects = find(*model, "fixed_effects")) {
    check_keys(*effects, {"county", "period"}, "model.fixed_effects");
    if (const json* county = find(*effects, "county")) {
      spec.county_effects = as_bool(*county, "model.fixed_effects.county");
    }
    if (const json* period = find(*effects, "period")) {
      spec.period_effects = as_bool(*period, "model.fixed_effects.period");
    }
  }
  if (const json* state = find(*model, "state")) {
    check_keys(*state, {"series", "percentile", "scope"}, "model.state");
    StateRule rule;
    if (const json* series = find(*state, "series")) {
      rule.series = as_string(*series, "model.state.series");
    } else {
      fail(ErrorKind::config, "model.state needs a series");
    }
    if (const json* percentile = find(*state, "percentile")) {
      rule.percentile = as_number(*percentile, "model.state.percentile");
    }
    if (const json* scope = find(*state, "scope")) {
      const std::string name = as_string(*scope, "model.state.scope");
      if (name == "county") {
        rule.scope = StateRule::Scope::county;
      } else if (name == "sample") {
        rule.scope = StateRule::Scope::sample;
      } else {
        fail(ErrorKind::config, "model.state.scope must be 'county' or 'sample'");
      }
    }
    spec.state = rule;
  }
  if (const json* spatial = find(*model, "spatial")) {
    spec.spatial = as_bool(*spatial, "model.spatial");
  }
  return spec;
}

int clean_control_window(const json* model) {
  if (model != nullptr) {
    if (const json* window = find(*model, "clean_control_window")) {
      return as_int(*window, "model.clean_control_window");
    }
  }
  return 36;
}

bool clean_controls_enabled(const json* model) {
  if (model != nullptr) {
    if (const json* flag = find(*model, "clean_controls")) {
      return as_bool(*flag, "model.clean_controls");
    }
  }
  return false;
}

std::string region_tag_name(const json* model) {
  if (model != nullptr) {
    if (const json* tag = find(*model, "region_tag")) {
      return as_string(*tag, "model.region_tag");
    }
  }
  return "region";
}

InferencePolicy parse_dk(const json* inference) {
  InferencePolicy policy;
  if (inference == nullptr) return policy;
  const json* dk = find(*inference, "dk");
  if (dk == nullptr) return policy;
  check_keys(*dk, {"kernel", "bandwidth", "small_sample"}, "inference.dk");
  if (const json* kernel = find(*dk, "kernel")) {
    const std::string name = as_string(*kernel, "inference.dk.kernel");
    if (name == "rectangular") {
      policy.kernel = HacKernel::rectangular;
    } else if (name == "bartlett") {
      policy.kernel = HacKernel::bartlett;
    } else {
      fail(ErrorKind::config, "inference.dk.kernel must be 'rectangular' or 'bartlett'");
    }
  }
  if (const json* bandwidth = find(*dk, "bandwidth")) {
    if (bandwidth->is_string()) {
      const std::string rule = bandwidth->get<std::string>();
      if (rule == "horizon") {
        policy.bandwidth_rule = InferencePolicy::Bandwidth::horizon;
      } else if (rule == "horizon_plus_one") {
        policy.bandwidth_rule = InferencePolicy::Bandwidth::horizon_plus_one;
      } else {
        fail(ErrorKind::config,
             "inference.dk.bandwidth must be 'horizon', 'horizon_plus_one', or an integer");
      }
    } else {
      policy.bandwidth_rule = InferencePolicy::Bandwidth::fixed;
      policy.fixed_bandwidth = as_int(*bandwidth, "inference.dk.bandwidth");
    }
  }
  if (const json* small = find(*dk, "small_sample")) {
    policy.small_sample = as_bool(*small, "inference.dk.small_sample");
  }
  return policy;
}

JackknifeOptions parse_jackknife(const json* inference) {
  JackknifeOptions options;
  if (inference == nullptr) return options;
  const json* jackknife = find(*inference, "jackknife");
  if (jackknife == nullptr) return options;
  check_keys(*jackknife, {"draws", "drop", "scale", "target"}, "inference.jackknife");
  if (const json* draws = find(*jackknife, "draws")) {
    options.draws = as_int(*draws, "inference.jackknife.draws");
  }
  if (const json* drop = find(*jackknife, "drop")) {
    options.drop_share = as_number(*drop, "inference.jackknife.drop");
  }
  if (const json* scale = find(*jackknife, "scale")) {
    const std::string name = as_string(*scale, "inference.jackknife.scale");
    if (name == "delete_d") {
      options.scale = JackknifeOptions::Scale::delete_d;
    } else if (name == "none") {
      options.scale = JackknifeOptions::Scale::none;
    } else {
      fail(ErrorKind::config, "inference.jackknife.scale must be 'delete_d' or 'none'");
    }
  }
  if (const json* target = find(*jackknife, "target")) {
    options.target_column = as_string(*target, "inference.jackknife.target");
  }
  return options;
}

DgpConfig parse_dgp(const json* synth) {
  DgpConfig config;
  if (synth == nullptr) return config;
  check_keys(*synth,
             {"counties", "periods", "frequency", "outcome", "log_outcome", "kernel",
              "impulse_size", "fire", "outcome_ar", "noise_sd", "county_effect_sd",
              "period_effect_sd", "state_plant", "split_plant"},
             "synth");
  if (const json* counties = find(*synth, "counties")) {
    config.n_counties = as_int(*counties, "synth.counties");
  }
  if (const json* periods = find(*synth, "periods")) {
    config.n_periods = as_int(*periods, "synth.periods");
  }
  if (const json* frequency = find(*synth, "frequency")) {
    const std::string name = as_string(*frequency, "synth.frequency");
    if (name == "monthly") {
      config.frequency = Frequency::monthly;
    } else if (name == "annual") {
      config.frequency = Frequency::annual;
    } else {
      fail(ErrorKind::config, "synth.frequency must be 'monthly' or 'annual'");
    }
  }
  if (const json* outcome = find(*synth, "outcome")) {
    config.outcome_series = as_string(*outcome, "synth.outcome");
  }
  if (const json* log_outcome = find(*synth, "log_outcome")) {
    config.log_outcome = as_bool(*log_outcome, "synth.log_outcome");
  }
  if (const json* kernel = find(*synth, "kernel")) {
    config.kernel = as_number_array(*kernel, "synth.kernel");
  }
  if (const json* impulse = find(*synth, "impulse_size")) {
    config.impulse_size = as_number(*impulse, "synth.impulse_size");
  }
  if (const json* fire = find(*synth, "fire")) {
    check_keys(*fire, {"occurrence", "lognormal_mu", "lognormal_sigma", "rho"}, "synth.fire");
    if (const json* occurrence = find(*fire, "occurrence")) {
      config.fire.occurrence = as_number(*occurrence, "synth.fire.occurrence");
    }
    if (const json* mu = find(*fire, "lognormal_mu")) {
      config.fire.lognormal_mu = as_number(*mu, "synth.fire.lognormal_mu");
    }
    if (const json* sigma = find(*fire, "lognormal_sigma")) {
      config.fire.lognormal_sigma = as_number(*sigma, "synth.fire.lognormal_sigma");
    }
    if (const json* rho = find(*fire, "rho")) {
      config.fire.rho = as_number(*rho, "synth.fire.rho");
    }
  }
  if (const json* ar = find(*synth, "outcome_ar")) {
    config.outcome_ar = as_number(*ar, "synth.outcome_ar");
  }
  if (const json* noise = find(*synth, "noise_sd")) {
    config.noise_sd = as_number(*noise, "synth.noise_sd");
  }
  if (const json* sd = find(*synth, "county_effect_sd")) {
    config.county_effect_sd = as_number(*sd, "synth.county_effect_sd");
  }
  if (const json* sd = find(*synth, "period_effect_sd")) {
    config.period_effect_sd = as_number(*sd, "synth.period_effect_sd");
  }
  if (const json* plant = find(*synth, "state_plant")) {
    check_keys(*plant, {"series", "percentile", "kernel_high", "kernel_low"}, "synth.state_plant");
    StatePlant state;
    if (const json* series = find(*plant, "series")) {
      state.series = as_string(*series, "synth.state_plant.series");
    }
    if (const json* percentile = find(*plant, "percentile")) {
      state.percentile = as_number(*percentile, "synth.state_plant.percentile");
    }
    if (const json* high = find(*plant, "kernel_high")) {
      state.kernel_high = as_number_array(*high, "synth.state_plant.kernel_high");
    }
    if (const json* low = find(*plant, "kernel_low")) {
      state.kernel_low = as_number_array(*low, "synth.state_plant.kernel_low");
    }
    config.state = state;
  }
  if (const json* plant = find(*synth, "split_plant")) {
    check_keys(*plant, {"attribute", "kernel_above", "kernel_below"}, "synth.split_plant");
    SplitPlant split;
    if (const json* attribute = find(*plant, "attribute")) {
      split.attribute = as_string(*attribute, "synth.split_plant.attribute");
    }
    if (const json* above = find(*plant, "kernel_above")) {
      split.kernel_above = as_number_array(*above, "synth.split_plant.kernel_above");
    }
    if (const json* below = find(*plant, "kernel_below")) {
      split.kernel_below = as_number_array(*below, "synth.split_plant.kernel_below");
    }
    config.split = split;
  }
  return config;
}

HeiOptions parse_hei(const json* hei, int default_depth) {
  HeiOptions options;
  options.depth = default_depth;
  if (hei == nullptr) return options;
  check_keys(*hei, {"shock", "region_tag", "population", "depth"}, "hei");
  if (const json* shock = find(*hei, "shock")) options.shock = as_string(*shock, "hei.shock");
  if (const json* tag = find(*hei, "region_tag")) {
    options.region_tag = as_string(*tag, "hei.region_tag");
  }
  if (const json* population = find(*hei, "population")) {
    options.population_attribute = as_string(*population, "hei.population");
  }
  if (const json* depth = find(*hei, "depth")) options.depth = as_int(*depth, "hei.depth");
  return options;
}

// ---------------------------------------------------------------------------
// Output plumbing.

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) fail(ErrorKind::io, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fail(ErrorKind::io, "cannot move '" + tmp.string() + "' into place: " + ec.message());
  }
}

std::string irf_table(const ImpulseResponse& path) {
  std::string out = "horizon,beta,se,scaled_beta,lo,hi\n";
  for (std::size_t h = 0; h < path.beta.size(); ++h) {
    out += std::to_string(h);
    out += ',';
    out += format_double(path.beta[h]);
    out += ',';
    out += format_double(path.se[h]);
    out += ',';
    out += format_double(path.scaled_beta[h]);
    out += ',';
    out += format_double(path.lo[h]);
    out += ',';
    out += format_double(path.hi[h]);
    out += '\n';
  }
  return out;
}

std::string run_info_table(const IrfResult& result) {
  std::string out = "horizon,n_obs,bandwidth\n";
  for (std::size_t h = 0; h < result.n_obs.size(); ++h) {
    out += std::to_string(h);
    out += ',';
    out += std::to_string(result.n_obs[h]);
    out += ',';
    out += std::to_string(result.bandwidth[h]);
    out += '\n';
  }
  return out;
}

std::string design_table(const HorizonDesign& design, const PanelDataset& panel) {
  std::string out = "county,period,response";
  for (const auto& name : design.column_names) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (int r = 0; r < design.n_rows(); ++r) {
    out += panel.county(design.row_county[static_cast<std::size_t>(r)]);
    out += ',';
    out += format_period(design.row_period[static_cast<std::size_t>(r)], panel.frequency());
    out += ',';
    out += format_double(design.response(r));
    for (int j = 0; j < design.n_cols(); ++j) {
      out += ',';
      out += format_double(design.regressors(r, j));
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared run state.

struct Overrides {
  std::string config_path;
  std::string output;
  std::string split_attribute;
  std::string region;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> horizons;
  bool state = false;
  bool spatial = false;
  bool clean_controls = false;
  bool dump_designs = false;
};

struct Run {
  json config;
  fs::path out_dir;
  std::uint64_t seed = 1;
  int threads = 1;
  ModelSpec spec;
  InferencePolicy policy;
  JackknifeOptions jackknife;
  HeiOptions hei;
  std::string region_tag;
  bool dump_designs = false;
  std::vector<std::pair<std::string, ModelSpec>> runs;  // file prefix -> spec
};

Run prepare(const Overrides& overrides) {
  Run run;
  if (!overrides.config_path.empty()) {
    run.config = load_config_file(overrides.config_path);
  } else {
    run.config = json::object();
  }
  check_keys(run.config, {"seed", "threads", "output_dir", "inputs", "model", "inference",
                          "synth", "hei"},
             "config");
  if (const json* seed = find(run.config, "seed")) {
    const long long value = seed->is_number_integer() ? seed->get<long long>() : -1;
    if (value < 0) fail(ErrorKind::config, "seed must be a non-negative integer");
    run.seed = static_cast<std::uint64_t>(value);
  }
  if (overrides.seed.has_value()) run.seed = *overrides.seed;
  if (const json* threads = find(run.config, "threads")) {
    run.threads = as_int(*threads, "threads");
  }
  if (overrides.threads.has_value()) run.threads = *overrides.threads;
  if (run.threads < 1) fail(ErrorKind::config, "threads must be at least 1");

  std::string out_dir = "out";
  if (const json* dir = find(run.config, "output_dir")) {
    out_dir = as_string(*dir, "output_dir");
  }
  if (!overrides.output.empty()) out_dir = overrides.output;
  run.out_dir = out_dir;

  const json* model = find(run.config, "model");
  run.spec = parse_model(model);
  if (overrides.horizons.has_value()) run.spec.horizons = *overrides.horizons;
  if (overrides.state && !run.spec.state.has_value()) {
    run.spec.state = StateRule{"unemployment", 70.0, StateRule::Scope::county};
  }
  if (overrides.spatial) run.spec.spatial = true;
  run.region_tag = region_tag_name(model);
  if (!overrides.region.empty()) {
    run.spec.filters.push_back(
        SampleFilter{SampleFilter::Kind::region, run.region_tag, overrides.region, 0});
  }
  if (overrides.clean_controls || clean_controls_enabled(model)) {
    run.spec.filters.push_back(SampleFilter{SampleFilter::Kind::clean_control, "", "",
                                            clean_control_window(model)});
  }

  const json* inference = find(run.config, "inference");
  run.policy = parse_dk(inference);
  run.jackknife = parse_jackknife(inference);
  run.jackknife.seed = run.seed;
  run.jackknife.threads = run.threads;
  run.hei = parse_hei(find(run.config, "hei"), run.spec.horizons);
  run.dump_designs = overrides.dump_designs;

  // A median split expands into two runs, one per attribute group; everything
  // else is a single unprefixed run.
  if (!overrides.split_attribute.empty()) {
    ModelSpec above = run.spec;
    above.filters.push_back(SampleFilter{SampleFilter::Kind::attribute_above_median,
                                         overrides.split_attribute, "", 0});
    ModelSpec below = run.spec;
    below.filters.push_back(SampleFilter{SampleFilter::Kind::attribute_below_median,
                                         overrides.split_attribute, "", 0});
    run.runs.emplace_back("above_", std::move(above));
    run.runs.emplace_back("below_", std::move(below));
  } else {
    run.runs.emplace_back("", run.spec);
  }
  return run;
}

struct Inputs {
  PanelDataset panel;
  std::optional<AdjacencyMatrix> adjacency;
};

Inputs load_inputs(const Run& run) {
  const json* inputs = find(run.config, "inputs");
  if (inputs == nullptr) fail(ErrorKind::config, "this subcommand needs an inputs block");
  check_keys(*inputs, {"panel", "attributes", "adjacency"}, "inputs");
  const json* panel_path = find(*inputs, "panel");
  if (panel_path == nullptr) fail(ErrorKind::config, "inputs.panel is required");
  Inputs loaded{load_panel_file(as_string(*panel_path, "inputs.panel")), std::nullopt};
  if (const json* attributes = find(*inputs, "attributes")) {
    load_attributes_file(loaded.panel, as_string(*attributes, "inputs.attributes"));
  }
  if (const json* adjacency = find(*inputs, "adjacency")) {
    loaded.adjacency =
        load_adjacency_file(as_string(*adjacency, "inputs.adjacency"), loaded.panel);
  }
  if (run.spec.spatial && !loaded.adjacency.has_value()) {
    fail(ErrorKind::config, "spatial terms need inputs.adjacency");
  }
  return loaded;
}

IrfOptions irf_options(const Run& run) {
  IrfOptions options;
  options.inference = run.policy;
  options.threads = run.threads;
  return options;
}

void ensure_output_dir(const Run& run) {
  std::error_code ec;
  fs::create_directories(run.out_dir, ec);
  if (ec) {
    fail(ErrorKind::io, "cannot create output directory '" + run.out_dir.string() +
                            "': " + ec.message());
  }
}

void dump_designs(const Run& run, const std::string& prefix, const ModelSpec& spec,
                  const PanelDataset& panel, const AdjacencyMatrix* adjacency) {
  const PanelDataset augmented = augment_for_spec(panel, spec, adjacency);
  for (int h = 0; h <= spec.horizons; ++h) {
    const HorizonDesign design = build_design(augmented, spec, h, adjacency);
    char name[32];
    std::snprintf(name, sizeof name, "design_%sh%02d.csv", prefix.c_str(), h);
    write_file_atomic(run.out_dir / name, design_table(design, augmented));
  }
}

// ---------------------------------------------------------------------------
// Subcommands.

int run_synth(const Run& run) {
  DgpConfig config = parse_dgp(find(run.config, "synth"));
  config.seed = run.seed;
  const SynthOutput output = generate(config);
  ensure_output_dir(run);

  std::ostringstream panel_csv;
  write_panel(output.panel, panel_csv);
  write_file_atomic(run.out_dir / "panel.csv", panel_csv.str());

  std::ostringstream attr_csv;
  write_attributes(output.panel, attr_csv);
  write_file_atomic(run.out_dir / "attributes.csv", attr_csv.str());

  const SynthTruth& truth = output.truth;
  std::vector<std::pair<std::string, const std::vector<double>*>> columns{
      {"kernel", &truth.kernel}, {"implied", &truth.implied}};
  if (!truth.kernel_high.empty()) {
    columns.emplace_back("kernel_high", &truth.kernel_high);
    columns.emplace_back("kernel_low", &truth.kernel_low);
  }
  if (!truth.kernel_above.empty()) {
    columns.emplace_back("kernel_above", &truth.kernel_above);
    columns.emplace_back("kernel_below", &truth.kernel_below);
  }
  std::size_t rows = 0;
  for (const auto& [name, values] : columns) rows = std::max(rows, values->size());
  std::string truth_csv = "horizon";
  for (const auto& [name, values] : columns) {
    truth_csv += ',';
    truth_csv += name;
  }
  truth_csv += '\n';
  for (std::size_t h = 0; h < rows; ++h) {
    truth_csv += std::to_string(h);
    for (const auto& [name, values] : columns) {
      truth_csv += ',';
      if (h < values->size()) truth_csv += format_double((*values)[h]);
    }
    truth_csv += '\n';
  }
  write_file_atomic(run.out_dir / "truth.csv", truth_csv);

  const PlantSummary summary = plant_summary(config);
  std::string text;
  text += "counties " + std::to_string(config.n_counties) + '\n';
  text += "periods " + std::to_string(config.n_periods) + '\n';
  text += std::string("frequency ") +
          (config.frequency == Frequency::monthly ? "monthly" : "annual") + '\n';
  text += "seed " + std::to_string(config.seed) + '\n';
  text += "fire_probability " + format_double(summary.fire_probability) + '\n';
  text += "mean_fire_size " + format_double(summary.mean_fire_size) + '\n';
  text += "median_fire_size " + format_double(summary.median_fire_size) + '\n';
  text += "mean_burn " + format_double(summary.mean_burn) + '\n';
  if (!is_missing(truth.split_median)) {
    text += "split_median " + format_double(truth.split_median) + '\n';
  }
  write_file_atomic(run.out_dir / "summary.txt", text);
  return 0;
}

int run_irf(const Run& run) {
  const Inputs inputs = load_inputs(run);
  ensure_output_dir(run);
  const AdjacencyMatrix* adjacency =
      inputs.adjacency.has_value() ? &*inputs.adjacency : nullptr;
  for (const auto& [prefix, spec] : run.runs) {
    const IrfResult result = estimate_irf(inputs.panel, spec, adjacency, irf_options(run));
    for (const auto& path : result.paths) {
      write_file_atomic(run.out_dir / ("irf_" + prefix + path.label + ".csv"),
                        irf_table(path));
    }
    write_file_atomic(run.out_dir / ("run_info_" + prefix + "irf.csv"),
                      run_info_table(result));
    std::string notes;
    for (const auto& note : result.notes) {
      notes += note;
      notes += '\n';
    }
    write_file_atomic(run.out_dir / ("notes_" + prefix + "irf.txt"), notes);
    if (run.dump_designs) dump_designs(run, prefix, spec, inputs.panel, adjacency);
  }
  return 0;
}

int run_cumulative(const Run& run) {
  const Inputs inputs = load_inputs(run);
  ensure_output_dir(run);
  const AdjacencyMatrix* adjacency =
      inputs.adjacency.has_value() ? &*inputs.adjacency : nullptr;
  std::string table = "label,max_horizon,cumulative_pp\n";
  for (const auto& [prefix, spec] : run.runs) {
    const IrfResult result = estimate_irf(inputs.panel, spec, adjacency, irf_options(run));
    for (const auto& path : result.paths) {
      const double total = cumulative_effect(path, spec.horizons);
      table += prefix + path.label;
      table += ',';
      table += std::to_string(spec.horizons);
      table += ',';
      table += format_double(total);
      table += '\n';
    }
  }
  write_file_atomic(run.out_dir / "cumulative.csv", table);
  return 0;
}

int run_jackknife(const Run& run) {
  if (run.runs.size() != 1) {
    fail(ErrorKind::config, "the jackknife subcommand does not take --split");
  }
  const Inputs inputs = load_inputs(run);
  ensure_output_dir(run);
  const AdjacencyMatrix* adjacency =
      inputs.adjacency.has_value() ? &*inputs.adjacency : nullptr;
  const ModelSpec& spec = run.runs.front().second;

  const IrfResult point = estimate_irf(inputs.panel, spec, adjacency, irf_options(run));
  const double cumulative = cumulative_effect(point.paths.front(), spec.horizons);

  const JackknifeResult jk = block_jackknife(inputs.panel, spec, adjacency, run.jackknife);

  std::string text;
  text += "target " +
          (run.jackknife.target_column.empty() ? point.paths.front().label
                                               : run.jackknife.target_column) +
          '\n';
  text += "draws " + std::to_string(jk.draw_paths.rows()) + '\n';
  text += "n_counties " + std::to_string(jk.n_counties) + '\n';
  text += "dropped_per_draw " + std::to_string(jk.n_dropped_per_draw) + '\n';
  text += "failures " + std::to_string(jk.failures) + '\n';
  text += "seed " + std::to_string(jk.seed) + '\n';
  text += "scale_factor " + format_double(jk.scale_factor) + '\n';
  text += "cumulative_pp " + format_double(cumulative) + '\n';
  text += "sd_cumulative " + format_double(jk.sd_cumulative) + '\n';
  write_file_atomic(run.out_dir / "jackknife.txt", text);

  std::string cov = "horizon";
  const int n_h = static_cast<int>(jk.covariance.rows());
  for (int h = 0; h < n_h; ++h) cov += ',' + std::to_string(h);
  cov += '\n';
  for (int h = 0; h < n_h; ++h) {
    cov += std::to_string(h);
    for (int g = 0; g < n_h; ++g) {
      cov += ',';
      cov += format_double(jk.covariance(h, g));
    }
    cov += '\n';
  }
  write_file_atomic(run.out_dir / "jackknife_cov.csv", cov);
  return 0;
}

int run_hei(const Run& run) {
  if (run.runs.size() != 1) {
    fail(ErrorKind::config, "the hei subcommand does not take --split");
  }
  const Inputs inputs = load_inputs(run);
  ensure_output_dir(run);
  const AdjacencyMatrix* adjacency =
      inputs.adjacency.has_value() ? &*inputs.adjacency : nullptr;
  const ModelSpec& spec = run.runs.front().second;
  const IrfResult result = estimate_irf(inputs.panel, spec, adjacency, irf_options(run));
  const HeiResult impact = historical_impact(inputs.panel, result.paths.front(), run.hei);

  std::string table = "region,period,impact_pp\n";
  const int n_periods = static_cast<int>(impact.regional.impact.cols());
  for (std::size_t r = 0; r < impact.regional.regions.size(); ++r) {
    for (int t = 0; t < n_periods; ++t) {
      table += impact.regional.regions[r];
      table += ',';
      table += format_period(impact.first_period + t, impact.frequency);
      table += ',';
      table += format_double(impact.regional.impact(static_cast<int>(r), t));
      table += '\n';
    }
  }
  write_file_atomic(run.out_dir / "hei.csv", table);
  return 0;
}

std::string kind_label(ErrorKind kind) { return error_kind_name(kind); }

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::io: return 2;
    case ErrorKind::data:
    case ErrorKind::estimation: return 1;
  }
  return 1;
}

void print_error_line(const std::string& kind, const std::string& message) {
  json line;
  line["error"] = kind;
  line["message"] = message;
  std::cerr << line.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panel local-projection estimation engine"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides overrides;
  app.add_option("-c,--config", overrides.config_path, "JSON config file");
  app.add_option("-o,--output", overrides.output, "Output directory (overrides config)");
  std::int64_t seed_flag = -1;
  app.add_option("--seed", seed_flag, "Random seed (overrides config)");
  int threads_flag = 0;
  app.add_option("--threads", threads_flag, "Worker threads (overrides config)");
  int horizons_flag = -1;
  app.add_option("--horizons", horizons_flag, "Maximum horizon (overrides config)");
  app.add_flag("--state", overrides.state, "Split the shock by the high/low regime rule");
  app.add_flag("--spatial", overrides.spatial, "Add neighbor and second-ring shock terms");
  app.add_flag("--clean-controls", overrides.clean_controls,
               "Keep only treated-now or never-nearby-treated rows");
  app.add_option("--split", overrides.split_attribute,
                 "Run each side of this attribute's median split");
  app.add_option("--region", overrides.region, "Restrict the sample to one region tag");
  app.add_flag("--dump-designs", overrides.dump_designs,
               "Write per-horizon design matrices (debug)");

  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic county panel");
  CLI::App* irf_cmd = app.add_subcommand("irf", "Estimate impulse response paths");
  CLI::App* cumulative_cmd =
      app.add_subcommand("cumulative", "Sum the response over horizons 1..H");
  CLI::App* jackknife_cmd =
      app.add_subcommand("jackknife", "County-block uncertainty for the response path");
  CLI::App* hei_cmd = app.add_subcommand("hei", "Historical impact series by region");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error_line("config", e.what());
    return 2;
  }

  if (seed_flag >= 0) overrides.seed = static_cast<std::uint64_t>(seed_flag);
  if (threads_flag > 0) overrides.threads = threads_flag;
  if (horizons_flag >= 0) overrides.horizons = horizons_flag;

  try {
    const Run run = prepare(overrides);
    if (synth_cmd->parsed()) return run_synth(run);
    if (irf_cmd->parsed()) return run_irf(run);
    if (cumulative_cmd->parsed()) return run_cumulative(run);
    if (jackknife_cmd->parsed()) return run_jackknife(run);
    if (hei_cmd->parsed()) return run_hei(run);
    fail(ErrorKind::config, "no subcommand selected");
  } catch (const Error& e) {
    print_error_line(kind_label(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    print_error_line("internal", e.what());
    return 1;
  }
}
