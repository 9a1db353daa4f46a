#include "actdist/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <sstream>

#include "actdist/datagen.hpp"
#include "actdist/distribution.hpp"
#include "actdist/error.hpp"
#include "actdist/evaluation.hpp"
#include "actdist/io.hpp"
#include "actdist/regression.hpp"

namespace fs = std::filesystem;

namespace actdist::cli {

namespace {

using io::format_number;

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  std::string input;
  std::string subjects;
  std::string out = "actdist_out";
  std::string spec;
  std::string model;
  std::size_t m = kDefaultGridSize;
  double censor_lower = 0.0;
  double censor_upper = 0.0;
  bool has_censor_lower = false;
  bool has_censor_upper = false;
  double threshold = 0.5;
  std::uint64_t seed = 1;
  bool has_seed = false;
  bool with_density = false;
  bool save_models = false;
  std::vector<std::string> responses;
  std::string response = "mortality";
  std::string lambda_grid;
  std::string bandwidth_grid;
  double bandwidth = 0.0;
  bool has_bandwidth = false;
  std::string predictor = "distribution";
  std::string kernel = "gaussian";
  std::string loo = "automatic";
  std::string age_column = "age";
  std::string column = "tac_per_day";

  CensorSpec censor() const {
    CensorSpec c;
    if (has_censor_lower) c.lower = censor_lower;
    if (has_censor_upper) c.upper = censor_upper;
    return c;
  }
};

std::string default_lambda_text() {
  std::string s;
  for (double l : default_lambda_grid()) s += (s.empty() ? "" : ",") + format_number(l);
  return s;
}

std::vector<double> parse_grid(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(v > 0.0)) throw Error("invalid " + what + " entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error("empty " + what);
  return out;
}

void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) throw Error(flag + " is required");
  if (!fs::is_regular_file(path)) throw IoError("cannot open " + path);
}

// ---------------------------------------------------------------------------
// Output files are written under temporary names and renamed together once
// the run succeeds; an abandoned set removes its temporaries.

class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw IoError("cannot create output directory " + dir_.string());
  }
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet() {
    if (committed_) return;
    for (const auto& f : files_) {
      std::error_code ec;
      fs::remove(f.tmp, ec);
    }
  }

  std::ostream& open(const std::string& name) {
    File f;
    f.final = dir_ / name;
    f.tmp = dir_ / ("." + name + ".partial");
    f.stream = std::make_unique<std::ofstream>(f.tmp, std::ios::binary | std::ios::trunc);
    if (!*f.stream) throw IoError("cannot write " + f.tmp.string());
    files_.push_back(std::move(f));
    return *files_.back().stream;
  }

  std::vector<fs::path> commit() {
    std::vector<fs::path> written;
    for (auto& f : files_) {
      f.stream->close();
      if (!*f.stream) throw IoError("failed writing " + f.final.string());
    }
    for (auto& f : files_) {
      std::error_code ec;
      fs::rename(f.tmp, f.final, ec);
      if (ec) throw IoError("cannot move " + f.tmp.string() + " into place");
      written.push_back(f.final);
    }
    committed_ = true;
    return written;
  }

 private:
  struct File {
    fs::path final;
    fs::path tmp;
    std::unique_ptr<std::ofstream> stream;
  };
  fs::path dir_;
  std::vector<File> files_;
  bool committed_ = false;
};

// ---------------------------------------------------------------------------
// Shared loading of build-dist outputs joined with a subjects table

struct Cohort {
  std::vector<std::string> ids;
  std::vector<QuantileGrid> grids;
  std::vector<double> tac;
  std::vector<double> weights;
  std::vector<std::map<std::string, double>> covariates;
  std::vector<std::map<std::string, std::string>> labels;
};

Cohort load_distributions(const RunConfig& cfg) {
  if (cfg.input.empty()) throw Error("--input is required");
  const fs::path dir(cfg.input);
  const fs::path qpath = fs::is_directory(dir) ? dir / "quantiles.csv" : dir;
  const fs::path spath = qpath.parent_path() / "summary.csv";
  require_file(qpath.string(), "--input");
  require_file(spath.string(), "--input");
  require_file(cfg.subjects, "--subjects");

  Cohort c;
  auto q = io::read_quantiles(qpath);
  c.ids = std::move(q.subject_ids);
  c.grids = std::move(q.grids);

  const auto summary = io::read_csv(spath);
  const std::size_t sid = summary.column("subject_id");
  const std::size_t stac = summary.column("tac_per_day");
  std::map<std::string, double> tac;
  for (std::size_t r = 0; r < summary.rows.size(); ++r) {
    tac[summary.rows[r][sid]] = std::stod(summary.rows[r][stac]);
  }

  const auto subjects = io::read_csv(cfg.subjects);
  const std::size_t id = subjects.column("subject_id");
  const std::size_t w = subjects.column("survey_weight");
  std::map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < subjects.rows.size(); ++r) row_of[subjects.rows[r][id]] = r;

  for (const auto& sid_text : c.ids) {
    const auto it = row_of.find(sid_text);
    if (it == row_of.end()) throw Error("subject '" + sid_text + "' missing from " + cfg.subjects);
    const auto t = tac.find(sid_text);
    if (t == tac.end()) throw Error("subject '" + sid_text + "' missing from " + spath.string());
    c.tac.push_back(t->second);
    const auto& row = subjects.rows[it->second];
    std::map<std::string, double> cov;
    std::map<std::string, std::string> lab;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k == id) continue;
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(row[k], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (k == w) {
        if (used != row[k].size() || !(v > 0.0)) {
          throw Error(cfg.subjects + ":" + std::to_string(subjects.line[it->second]) +
                      ": survey_weight must be positive");
        }
        c.weights.push_back(v);
      } else if (!row[k].empty() && used == row[k].size()) {
        cov[subjects.header[k]] = v;
      } else {
        lab[subjects.header[k]] = row[k];
      }
    }
    c.covariates.push_back(std::move(cov));
    c.labels.push_back(std::move(lab));
  }
  if (c.ids.empty()) throw Error("no subjects in " + qpath.string());
  return c;
}

std::vector<double> response_column(const Cohort& c, const std::string& name,
                                    const std::vector<std::string>& header) {
  if (std::find(header.begin(), header.end(), name) == header.end()) {
    throw Error("missing response column '" + name + "'");
  }
  std::vector<double> y;
  for (std::size_t i = 0; i < c.ids.size(); ++i) {
    const auto it = c.covariates[i].find(name);
    if (it == c.covariates[i].end()) {
      throw Error("response '" + name + "' is missing or non-numeric for subject '" + c.ids[i] + "'");
    }
    y.push_back(it->second);
  }
  return y;
}

SurveySample make_sample(const Cohort& c, const std::vector<double>& y, bool distributional) {
  SurveySample s;
  s.responses = y;
  s.weights = c.weights;
  for (std::size_t i = 0; i < c.ids.size(); ++i) {
    if (distributional) {
      s.predictors.emplace_back(c.grids[i]);
    } else {
      s.predictors.emplace_back(c.tac[i]);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// build-dist

int cmd_build_dist(const RunConfig& cfg, std::ostream& out) {
  require_file(cfg.input, "--input");
  require_file(cfg.subjects, "--subjects");
  if (cfg.m < 2) throw Error("--m must be at least 2");
  const CensorSpec censor = cfg.censor();
  censor.validate();

  const auto cohort = io::load_cohort(cfg.input, cfg.subjects);
  io::QuantileTable table;
  std::vector<MixedDistribution> dists;
  std::vector<double> tac;
  for (const auto& s : cohort) {
    dists.push_back(build_mixed(s, censor, cfg.m, cfg.with_density));
    table.subject_ids.push_back(s.subject_id);
    table.grids.push_back(dists.back().quantiles);
    tac.push_back(tac_per_day(s));
  }

  OutputSet files(cfg.out);
  io::write_quantiles(files.open("quantiles.csv"), table);
  auto& summary = files.open("summary.csv");
  summary << "subject_id,p_inactive,tac_per_day\n";
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    summary << cohort[i].subject_id << ',' << format_number(dists[i].p_inactive) << ','
            << format_number(tac[i]) << '\n';
  }
  if (cfg.with_density) {
    auto& density = files.open("density.csv");
    density << "subject_id,x,density,bandwidth\n";
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      if (!dists[i].active_density) continue;
      const auto& d = *dists[i].active_density;
      for (std::size_t k = 0; k < d.abscissae.size(); ++k) {
        density << cohort[i].subject_id << ',' << format_number(d.abscissae[k]) << ','
                << format_number(d.ordinates[k]) << ',' << format_number(d.bandwidth) << '\n';
      }
    }
  }
  for (const auto& p : files.commit()) out << "wrote " << p.string() << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------
// regress

LooOptions loo_options(const RunConfig& cfg) {
  LooOptions o;
  if (cfg.loo == "automatic") {
    o.method = LooMethod::automatic;
  } else if (cfg.loo == "hat") {
    o.method = LooMethod::hat_matrix;
  } else if (cfg.loo == "explicit") {
    o.method = LooMethod::explicit_refit;
  } else {
    throw Error("--loo must be automatic, hat or explicit");
  }
  return o;
}

int cmd_regress(const RunConfig& cfg, std::ostream& out) {
  R2Options options;
  options.lambda_grid = parse_grid(cfg.lambda_grid, "lambda grid");
  options.loo = loo_options(cfg);
  if (cfg.responses.empty()) throw Error("at least one --response is required");
  const Cohort cohort = load_distributions(cfg);
  const auto header = io::read_csv(cfg.subjects).header;

  std::vector<R2Comparison> results;
  for (const auto& name : cfg.responses) {
    const auto y = response_column(cohort, name, header);
    results.push_back(compare_r2(make_sample(cohort, y, true), make_sample(cohort, y, false), name,
                                 options));
  }

  OutputSet files(cfg.out);
  auto& report = files.open("regress_report.csv");
  report << "response,n,r2_distribution,r2_tac,lambda_distribution,lambda_tac,"
            "sigma_distribution,sigma_tac\n";
  for (const auto& r : results) {
    report << r.response << ',' << cohort.ids.size() << ',' << format_number(r.distribution.r2)
           << ',' << format_number(r.tac.r2) << ',' << format_number(r.distribution.lambda) << ','
           << format_number(r.tac.lambda) << ',' << format_number(r.distribution.sigma) << ','
           << format_number(r.tac.sigma) << '\n';
  }
  auto& loo = files.open("regress_predictions.csv");
  loo << "response,subject_id,survey_weight,observed,loo_distribution,loo_tac\n";
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto y = response_column(cohort, results[k].response, header);
    for (std::size_t i = 0; i < cohort.ids.size(); ++i) {
      loo << results[k].response << ',' << cohort.ids[i] << ',' << format_number(cohort.weights[i])
          << ',' << format_number(y[i]) << ','
          << format_number(results[k].distribution.loo_predictions[i]) << ','
          << format_number(results[k].tac.loo_predictions[i]) << '\n';
    }
  }
  if (cfg.save_models) {
    for (const auto& r : results) {
      const auto y = response_column(cohort, r.response, header);
      // Fitted on the same mean-one weights the lambda was selected with.
      for (const bool dist : {true, false}) {
        SurveySample s = make_sample(cohort, y, dist);
        double total = 0.0;
        for (double w : s.weights) total += w;
        for (double& w : s.weights) w *= static_cast<double>(s.size()) / total;
        const auto& fit = dist ? r.distribution : r.tac;
        KrrOptions ko;
        ko.sigma = fit.sigma;
        save_model(krr_fit(s, fit.lambda, ko),
                   files.open("model_" + r.response + (dist ? "_distribution" : "_tac") + ".json"));
      }
    }
  }
  for (const auto& p : files.commit()) out << "wrote " << p.string() << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------
// classify

SmoothingKernel parse_kernel(const std::string& k) {
  if (k == "gaussian") return SmoothingKernel::gaussian;
  if (k == "epanechnikov") return SmoothingKernel::epanechnikov;
  if (k == "uniform") return SmoothingKernel::uniform;
  throw Error("--kernel must be gaussian, epanechnikov or uniform");
}

void write_profiles(std::ostream& os, const std::string& family,
                    const std::map<std::string, FrechetSummary>& groups) {
  for (const auto& [name, g] : groups) {
    for (std::size_t k = 0; k < g.mean.size(); ++k) {
      os << family << ',' << name << ',' << format_number(g.mean.level(k)) << ','
         << format_number(g.mean[k]) << ',' << format_number(g.pointwise_sd[k]) << '\n';
    }
  }
}

int cmd_classify(const RunConfig& cfg, std::ostream& out) {
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) throw Error("--threshold must lie in [0, 1]");
  if (cfg.predictor != "distribution" && cfg.predictor != "tac") {
    throw Error("--predictor must be distribution or tac");
  }
  const Cohort cohort = load_distributions(cfg);
  const auto header = io::read_csv(cfg.subjects).header;
  const auto y = response_column(cohort, cfg.response, header);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw Error("response '" + cfg.response + "' is not binary (subject '" + cohort.ids[i] + "')");
    }
  }
  const SurveySample sample = make_sample(cohort, y, cfg.predictor == "distribution");

  NwConfig nw;
  nw.kernel = parse_kernel(cfg.kernel);
  if (cfg.has_bandwidth) {
    nw.bandwidth = cfg.bandwidth;
  } else {
    const auto d = pairwise_distances(sample.predictors, resolve_metric(sample, Metric::automatic));
    const auto grid = cfg.bandwidth_grid.empty() ? default_bandwidth_grid(d, sample.size())
                                                 : parse_grid(cfg.bandwidth_grid, "bandwidth grid");
    nw.bandwidth = nw_select_bandwidth(sample, nw, grid);
  }
  const auto outcome = classify_mortality(sample, nw, cfg.threshold);
  const auto groups = assign_risk_groups(outcome);

  OutputSet files(cfg.out);
  auto& pred = files.open("predictions.csv");
  pred << "subject_id,survey_weight,probability,predicted,actual,risk_group\n";
  for (std::size_t i = 0; i < cohort.ids.size(); ++i) {
    const auto& s = outcome.subjects[i];
    pred << cohort.ids[i] << ',' << format_number(s.weight) << ','
         << (s.probability ? format_number(*s.probability) : "") << ','
         << (s.probability ? (s.predicted ? "1" : "0") : "") << ',' << (s.actual ? 1 : 0) << ','
         << to_string(groups[i]) << '\n';
  }
  auto& conf = files.open("confusion.csv");
  conf << "threshold,bandwidth,tp,fp,tn,fn,accuracy,auc,unclassified\n";
  conf << format_number(outcome.threshold) << ',' << format_number(outcome.bandwidth) << ','
       << format_number(outcome.tp) << ',' << format_number(outcome.fp) << ','
       << format_number(outcome.tn) << ',' << format_number(outcome.fn) << ','
       << (outcome.total() > 0.0 ? format_number(outcome.accuracy()) : "") << ','
       << (outcome.auc ? format_number(*outcome.auc) : "") << ',' << outcome.unclassified << '\n';

  auto& risk = files.open("risk_groups.csv");
  risk << "subject_id,group\n";
  for (std::size_t i = 0; i < cohort.ids.size(); ++i) {
    risk << cohort.ids[i] << ',' << to_string(groups[i]) << '\n';
  }

  // Fréchet profiles by outcome, risk group, age stratum, and risk x age.
  std::vector<std::string> outcome_label;
  std::vector<std::string> risk_label;
  std::vector<std::string> age_label;
  for (std::size_t i = 0; i < cohort.ids.size(); ++i) {
    outcome_label.push_back(y[i] == 1.0 ? "deceased" : "survived");
    risk_label.push_back(to_string(groups[i]));
    std::string stratum;
    if (const auto it = cohort.covariates[i].find(cfg.age_column);
        it != cohort.covariates[i].end()) {
      try {
        stratum = stratify_age(it->second);
      } catch (const Error& e) {
        warn("subject '" + cohort.ids[i] + "': " + e.what());
      }
    }
    age_label.push_back(stratum);
  }
  auto& prof = files.open("group_profiles.csv");
  prof << "family,group,t,mean,sd\n";
  const std::vector<std::string> risk_names{"A", "B"};
  write_profiles(prof, "outcome",
                 group_profiles(cohort.grids, cohort.weights, outcome_label));
  {
    std::vector<QuantileGrid> g;
    std::vector<double> w;
    std::vector<std::string> l;
    std::vector<QuantileGrid> ga;
    std::vector<double> wa;
    std::vector<std::string> la;
    std::vector<QuantileGrid> gra;
    std::vector<double> wra;
    std::vector<std::string> lra;
    for (std::size_t i = 0; i < cohort.ids.size(); ++i) {
      const bool in_risk = groups[i] != RiskGroup::unassigned;
      if (in_risk) {
        g.push_back(cohort.grids[i]);
        w.push_back(cohort.weights[i]);
        l.push_back(risk_label[i]);
      }
      if (!age_label[i].empty()) {
        ga.push_back(cohort.grids[i]);
        wa.push_back(cohort.weights[i]);
        la.push_back(age_label[i]);
        if (in_risk) {
          gra.push_back(cohort.grids[i]);
          wra.push_back(cohort.weights[i]);
          lra.push_back(risk_label[i] + ":" + age_label[i]);
        }
      }
    }
    write_profiles(prof, "risk", group_profiles(g, w, l, risk_names));
    write_profiles(prof, "age", group_profiles(ga, wa, la));
    write_profiles(prof, "risk_age", group_profiles(gra, wra, lra));
  }
  for (const auto& p : files.commit()) out << "wrote " << p.string() << '\n';
  out << "weighted accuracy "
      << (outcome.total() > 0.0 ? format_number(outcome.accuracy()) : std::string("n/a"))
      << " at threshold " << format_number(cfg.threshold) << ", bandwidth "
      << format_number(nw.bandwidth) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulationSpec {
  PopulationSpec population;
  DesignSpec design;
};

SimulationSpec default_simulation() {
  SimulationSpec s;
  s.population.population_size = 400;
  s.population.minutes = 1440;
  s.population.seed = 1;
  StratumSpec sedentary;
  sedentary.name = "sedentary";
  sedentary.proportion = 0.3;
  sedentary.inactivity = {0.6, 0.85};
  sedentary.intensity_mean = {400.0, 400.0};
  sedentary.intensity_spread = {0.3, 1.5};
  sedentary.response = {20.0, 0.0, 0.0, 10.0, 0.5};
  sedentary.mortality_rate = 0.35;
  StratumSpec moderate;
  moderate.name = "moderate";
  moderate.proportion = 0.5;
  moderate.inactivity = {0.4, 0.65};
  moderate.intensity_mean = {400.0, 400.0};
  moderate.intensity_spread = {0.3, 1.5};
  moderate.response = {20.0, 0.0, 0.0, 10.0, 0.5};
  moderate.mortality_rate = 0.15;
  StratumSpec active;
  active.name = "active";
  active.proportion = 0.2;
  active.inactivity = {0.2, 0.45};
  active.law = IntensityLaw::gamma;
  active.intensity_mean = {400.0, 400.0};
  active.intensity_spread = {0.3, 1.2};
  active.response = {20.0, 0.0, 0.0, 10.0, 0.5};
  active.mortality_rate = 0.05;
  s.population.strata = {sedentary, moderate, active};
  s.design.kind = DesignKind::stratified;
  s.design.sample_size = 150;
  s.design.allocation = {0.5, 0.3, 0.2};
  return s;
}

using nlohmann::json;

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error("ranges must be [lo, hi] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

json to_json(const SimulationSpec& s) {
  json strata = json::array();
  for (const auto& st : s.population.strata) {
    strata.push_back({{"name", st.name},
                      {"proportion", st.proportion},
                      {"inactivity", range_json(st.inactivity)},
                      {"law", st.law == IntensityLaw::lognormal ? "lognormal" : "gamma"},
                      {"intensity_mean", range_json(st.intensity_mean)},
                      {"intensity_spread", range_json(st.intensity_spread)},
                      {"age", range_json(st.age)},
                      {"mortality_rate", st.mortality_rate},
                      {"response",
                       {{"intercept", st.response.intercept},
                        {"inactivity", st.response.inactivity},
                        {"intensity_mean", st.response.intensity_mean},
                        {"intensity_spread", st.response.intensity_spread},
                        {"noise_sd", st.response.noise_sd}}}});
  }
  return {{"population",
           {{"population_size", s.population.population_size},
            {"minutes", s.population.minutes},
            {"seed", s.population.seed},
            {"strata", strata}}},
          {"design",
           {{"kind", s.design.kind == DesignKind::stratified ? "stratified" : "poisson"},
            {"sample_size", s.design.sample_size},
            {"allocation", s.design.allocation}}}};
}

SimulationSpec simulation_from_json(const json& j) {
  SimulationSpec s;
  const auto& p = j.at("population");
  s.population.population_size = p.at("population_size").get<std::size_t>();
  s.population.minutes = p.value("minutes", std::size_t{1440});
  s.population.seed = p.value("seed", std::uint64_t{1});
  for (const auto& js : p.at("strata")) {
    StratumSpec st;
    st.name = js.value("name", std::string{});
    st.proportion = js.at("proportion").get<double>();
    if (js.contains("inactivity")) st.inactivity = range_from(js["inactivity"]);
    const auto law = js.value("law", std::string("lognormal"));
    if (law == "lognormal") {
      st.law = IntensityLaw::lognormal;
    } else if (law == "gamma") {
      st.law = IntensityLaw::gamma;
    } else {
      throw Error("unknown intensity law '" + law + "'");
    }
    if (js.contains("intensity_mean")) st.intensity_mean = range_from(js["intensity_mean"]);
    if (js.contains("intensity_spread")) st.intensity_spread = range_from(js["intensity_spread"]);
    if (js.contains("age")) st.age = range_from(js["age"]);
    st.mortality_rate = js.value("mortality_rate", 0.0);
    if (js.contains("response")) {
      const auto& r = js["response"];
      st.response.intercept = r.value("intercept", 0.0);
      st.response.inactivity = r.value("inactivity", 0.0);
      st.response.intensity_mean = r.value("intensity_mean", 0.0);
      st.response.intensity_spread = r.value("intensity_spread", 0.0);
      st.response.noise_sd = r.value("noise_sd", 0.0);
    }
    s.population.strata.push_back(st);
  }
  const auto& d = j.at("design");
  const auto kind = d.value("kind", std::string("stratified"));
  if (kind == "stratified") {
    s.design.kind = DesignKind::stratified;
  } else if (kind == "poisson") {
    s.design.kind = DesignKind::poisson;
  } else {
    throw Error("unknown design kind '" + kind + "'");
  }
  s.design.sample_size = d.at("sample_size").get<std::size_t>();
  s.design.allocation = d.value("allocation", std::vector<double>{});
  return s;
}

SimulationSpec load_simulation(const RunConfig& cfg) {
  SimulationSpec s = default_simulation();
  if (!cfg.spec.empty()) {
    require_file(cfg.spec, "--spec");
    std::ifstream in(cfg.spec);
    try {
      s = simulation_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(cfg.spec + ": invalid simulation spec: " + e.what());
    }
  }
  if (cfg.has_seed) s.population.seed = cfg.seed;
  return s;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const SimulationSpec spec = load_simulation(cfg);
  const Population pop = simulate_population(spec.population);
  const SampledCohort sample = draw_sample(pop, spec.design, spec.population.seed);

  OutputSet files(cfg.out);
  io::write_readings(files.open("population_readings.csv"), pop.subjects);
  io::write_subjects(files.open("population_subjects.csv"), pop.subjects);
  io::write_readings(files.open("sample_readings.csv"), sample.subjects);
  io::write_subjects(files.open("sample_subjects.csv"), sample.subjects);

  const auto pi = inclusion_probabilities(pop, spec.design);
  std::set<std::size_t> in_sample(sample.population_index.begin(), sample.population_index.end());
  auto& truth = files.open("ground_truth.csv");
  truth << "subject_id,stratum,inclusion_probability,in_sample\n";
  for (std::size_t i = 0; i < pop.subjects.size(); ++i) {
    truth << pop.subjects[i].subject_id << ',' << pop.subjects[i].labels.at("stratum") << ','
          << format_number(pi[i]) << ',' << (in_sample.contains(i) ? 1 : 0) << '\n';
  }
  auto& means = files.open("population_means.csv");
  means << "covariate,true_mean\n";
  for (const auto& [name, v] : pop.true_means) means << name << ',' << format_number(v) << '\n';
  files.open("simulation_spec.json") << to_json(spec).dump(2) << '\n';

  for (const auto& p : files.commit()) out << "wrote " << p.string() << '\n';
  out << "population " << pop.subjects.size() << ", sample " << sample.subjects.size() << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
  require_file(cfg.model, "--model");
  require_file(cfg.input, "--input");
  std::ifstream in(cfg.model);
  const KrrModel model = load_model(in);

  std::vector<std::string> ids;
  std::vector<Predictor> xs;
  if (model.metric == Metric::wasserstein) {
    auto q = io::read_quantiles(cfg.input);
    ids = std::move(q.subject_ids);
    for (auto& g : q.grids) xs.emplace_back(std::move(g));
  } else {
    const auto t = io::read_csv(cfg.input);
    const std::size_t id = t.column("subject_id");
    const std::size_t col = t.column(cfg.column);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      ids.push_back(t.rows[r][id]);
      xs.emplace_back(std::stod(t.rows[r][col]));
    }
  }
  OutputSet files(cfg.out);
  auto& os = files.open("predictions.csv");
  os << "subject_id,prediction\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    os << ids[i] << ',' << format_number(krr_predict(model, xs[i])) << '\n';
  }
  for (const auto& p : files.commit()) out << "wrote " << p.string() << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------
// Option wiring

void add_io_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--input", cfg.input, "Input file or directory");
  sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
}

void add_subjects_option(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--subjects", cfg.subjects, "Subjects CSV (subject_id, survey_weight, covariates)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  cfg.lambda_grid = default_lambda_text();

  CLI::App app{"Distributional representations of activity data and survey-weighted regression"};
  app.name("actdist");
  app.set_config("--config", "", "Read options from an INI/TOML file");
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print the effective configuration and exit")
      ->configurable(false);
  app.require_subcommand(1);

  auto* build = app.add_subcommand("build-dist", "Build quantile representations from raw readings");
  add_io_options(build, cfg);
  add_subjects_option(build, cfg);
  build->add_option("--m", cfg.m, "Quantile grid size")->capture_default_str();
  auto* lower = build->add_option("--censor-lower", cfg.censor_lower, "Inactivity cutoff");
  auto* upper = build->add_option("--censor-upper", cfg.censor_upper, "Upper truncation");
  build->add_flag("--with-density", cfg.with_density, "Also write active-part densities");

  auto* regress = app.add_subcommand("regress", "Compare LOO R^2 of distribution vs TAC");
  add_io_options(regress, cfg);
  add_subjects_option(regress, cfg);
  regress->add_option("--response", cfg.responses, "Response column (repeatable)");
  regress->add_option("--lambda-grid", cfg.lambda_grid, "Comma-separated lambda values")
      ->capture_default_str();
  regress->add_option("--loo", cfg.loo, "automatic | hat | explicit")->capture_default_str();
  regress->add_flag("--save-models", cfg.save_models, "Write fitted models as JSON");

  auto* classify = app.add_subcommand("classify", "Leave-one-out mortality classification");
  add_io_options(classify, cfg);
  add_subjects_option(classify, cfg);
  classify->add_option("--response", cfg.response, "Binary response column")->capture_default_str();
  classify->add_option("--threshold", cfg.threshold, "Probability threshold")->capture_default_str();
  auto* bw = classify->add_option("--bandwidth", cfg.bandwidth, "Fixed smoother bandwidth");
  classify->add_option("--bandwidth-grid", cfg.bandwidth_grid, "Comma-separated bandwidths");
  classify->add_option("--predictor", cfg.predictor, "distribution | tac")->capture_default_str();
  classify->add_option("--kernel", cfg.kernel, "gaussian | epanechnikov | uniform")
      ->capture_default_str();
  classify->add_option("--age-column", cfg.age_column, "Covariate used for age strata")
      ->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic population and survey sample");
  simulate->add_option("--out", cfg.out, "Output directory")->capture_default_str();
  simulate->add_option("--spec", cfg.spec, "Simulation spec (JSON)");
  auto* seed = simulate->add_option("--seed", cfg.seed, "Random seed override");

  auto* predict = app.add_subcommand("predict", "Apply a saved kernel ridge model");
  add_io_options(predict, cfg);
  predict->add_option("--model", cfg.model, "Model JSON written by regress --save-models");
  predict->add_option("--column", cfg.column, "Scalar predictor column")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    if (print_config) {
      // Fall through: --print-config without a subcommand is fine.
    } else {
      err << "error: " << e.what() << '\n';
      return kValidationFailure;
    }
  }
  cfg.has_censor_lower = lower->count() > 0;
  cfg.has_censor_upper = upper->count() > 0;
  cfg.has_bandwidth = bw->count() > 0;
  cfg.has_seed = seed->count() > 0;

  if (print_config) {
    out << app.config_to_str(true, true);
    if (simulate->parsed() || app.get_subcommands().empty()) {
      out << "# default simulation spec (simulate --spec)\n" << to_json(default_simulation()).dump(2)
          << '\n';
    }
    return kSuccess;
  }

  try {
    if (build->parsed()) return cmd_build_dist(cfg, out);
    if (regress->parsed()) return cmd_regress(cfg, out);
    if (classify->parsed()) return cmd_classify(cfg, out);
    if (simulate->parsed()) return cmd_simulate(cfg, out);
    if (predict->parsed()) return cmd_predict(cfg, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  }
  err << "error: no subcommand\n";
  return kValidationFailure;
}

}  // namespace actdist::cli
