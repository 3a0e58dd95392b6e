#include "fedback/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "fedback/errors.hpp"

namespace fedback {

namespace {

using nlohmann::json;

// Reads keys from one JSON object and rejects any key nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string scope) : obj_(obj), scope_(std::move(scope)) {
    if (!obj_.is_object()) fail("", "expected a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }

  template <typename T>
  void read(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return;
    T value{};
    read(key, value);
    out = value;
  }

  bool has(const char* key) const { return obj_.contains(key); }
  const json& at(const char* key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    const std::string field = scope_.empty() ? key : scope_ + "." + key;
    throw ParseError("config field '" + field + "': " + why, 0, field);
  }

 private:
  const json& obj_;
  std::string scope_;
  std::set<std::string> seen_;
};

template <typename Enum>
Enum parse_enum(ObjectReader& r, const char* key, Enum fallback,
                std::initializer_list<std::pair<const char*, Enum>> names) {
  std::string text;
  r.read(key, text);
  if (text.empty()) return fallback;
  for (const auto& [name, value] : names) {
    if (text == name) return value;
  }
  r.fail(key, "unrecognised value '" + text + "'");
}

}  // namespace

Algorithm parse_algorithm(std::string_view name) {
  if (name == "fedback") return Algorithm::fedback;
  if (name == "fedadmm") return Algorithm::fedadmm;
  if (name == "fedavg") return Algorithm::fedavg;
  if (name == "fedprox") return Algorithm::fedprox;
  throw ParseError("unknown algorithm '" + std::string(name) + "'", 0, "algorithm");
}

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::fedback: return "fedback";
    case Algorithm::fedadmm: return "fedadmm";
    case Algorithm::fedavg: return "fedavg";
    case Algorithm::fedprox: return "fedprox";
  }
  return "?";
}

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0, "");
  }

  ExperimentConfig out;
  RunConfig& cfg = out.run;
  ObjectReader r(root, "");
  r.read("clients", cfg.clients);
  r.read("rounds", cfg.rounds);
  if (r.has("rho") && r.at("rho").is_string()) {
    if (r.at("rho").get<std::string>() != "auto") r.fail("rho", "expected a number or \"auto\"");
    cfg.auto_rho = true;
  } else {
    r.read("rho", cfg.rho);
  }
  r.read("gain", cfg.gains.gain);
  r.read("alpha", cfg.gains.filter_constant);
  if (r.has("target") && r.has("targets")) r.fail("target", "give either target or targets");
  if (r.has("target")) {
    double t = 0.0;
    r.read("target", t);
    cfg.targets = {t};
  }
  r.read("targets", cfg.targets);
  r.read("epsilon0", cfg.epsilon0);
  r.read("seed", cfg.seed);
  std::string algorithm = "fedback";
  r.read("algorithm", algorithm);
  try {
    cfg.algorithm = parse_algorithm(algorithm);
  } catch (const ParseError&) {
    r.fail("algorithm", "unrecognised value '" + algorithm + "'");
  }
  r.read("delta0", cfg.delta0);
  r.read("load0", cfg.load0);
  r.read("z0", cfg.z0);
  cfg.metric = parse_enum(r, "metric", DistanceMetric::euclidean,
                          {{"euclidean", DistanceMetric::euclidean}, {"infinity", DistanceMetric::infinity}});
  r.read("freeze_thresholds", cfg.freeze_thresholds);
  r.read("validate_rho", cfg.validate_rho);
  r.read("fedavg_steps", cfg.fedavg_steps);
  r.read("fedavg_lr", cfg.fedavg_lr);
  r.read("fedprox_mu", cfg.fedprox_mu);
  r.read("threads", cfg.threads);

  if (r.has("partition")) {
    ObjectReader p(r.at("partition"), "partition");
    cfg.partition.scheme = parse_enum(p, "scheme", PartitionScheme::dirichlet,
                                      {{"dirichlet", PartitionScheme::dirichlet},
                                       {"label_shard", PartitionScheme::label_shard}});
    p.read("beta", cfg.partition.beta);
    p.read("shards_per_client", cfg.partition.shards_per_client);
    p.read("seed", cfg.partition_seed);
    p.finish();
  }
  if (r.has("data")) {
    ObjectReader d(r.at("data"), "data");
    cfg.data.task = parse_enum(d, "task", Task::regression,
                               {{"regression", Task::regression}, {"classification", Task::classification}});
    d.read("samples", cfg.data.samples);
    d.read("features", cfg.data.features);
    d.read("classes", cfg.data.classes);
    d.read("noise", cfg.data.synthetic.noise);
    d.read("cluster_spread", cfg.data.synthetic.cluster_spread);
    d.read("heterogeneity", cfg.data.synthetic.heterogeneity);
    d.read("seed", cfg.data.seed);
    d.read("csv", cfg.data.csv_path);
    d.finish();
  }
  if (r.has("report")) {
    ObjectReader rep(r.at("report"), "report");
    out.report.metric = parse_enum(rep, "metric", TargetMetric::loss,
                                   {{"loss", TargetMetric::loss}, {"grad_norm", TargetMetric::grad_norm}});
    rep.read("target", out.report.target);
    rep.finish();
  }
  r.read("per_client_columns", out.per_client_columns);
  r.finish();
  return out;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string(), 0, "");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& ec, int indent) {
  const RunConfig& cfg = ec.run;
  json j;
  j["clients"] = cfg.clients;
  j["rounds"] = cfg.rounds;
  j["rho"] = cfg.auto_rho ? json("auto") : json(cfg.rho);
  j["gain"] = cfg.gains.gain;
  j["alpha"] = cfg.gains.filter_constant;
  j["targets"] = cfg.targets;
  j["epsilon0"] = cfg.epsilon0;
  j["seed"] = cfg.seed;
  j["algorithm"] = std::string(to_string(cfg.algorithm));
  j["delta0"] = cfg.delta0;
  j["load0"] = cfg.load0;
  j["z0"] = cfg.z0;
  j["metric"] = cfg.metric == DistanceMetric::euclidean ? "euclidean" : "infinity";
  j["freeze_thresholds"] = cfg.freeze_thresholds;
  j["validate_rho"] = cfg.validate_rho;
  j["fedavg_steps"] = cfg.fedavg_steps;
  j["fedavg_lr"] = cfg.fedavg_lr ? json(*cfg.fedavg_lr) : json(nullptr);
  j["fedprox_mu"] = cfg.fedprox_mu ? json(*cfg.fedprox_mu) : json(nullptr);
  j["threads"] = cfg.threads;
  j["partition"] = {
      {"scheme", cfg.partition.scheme == PartitionScheme::dirichlet ? "dirichlet" : "label_shard"},
      {"beta", cfg.partition.beta},
      {"shards_per_client", cfg.partition.shards_per_client},
      {"seed", cfg.partition_seed ? json(*cfg.partition_seed) : json(nullptr)}};
  j["data"] = {{"task", cfg.data.task == Task::regression ? "regression" : "classification"},
               {"samples", cfg.data.samples},
               {"features", cfg.data.features},
               {"classes", cfg.data.classes},
               {"noise", cfg.data.synthetic.noise},
               {"cluster_spread", cfg.data.synthetic.cluster_spread},
               {"heterogeneity", cfg.data.synthetic.heterogeneity},
               {"seed", cfg.data.seed ? json(*cfg.data.seed) : json(nullptr)},
               {"csv", cfg.data.csv_path ? json(*cfg.data.csv_path) : json(nullptr)}};
  j["report"] = {{"metric", ec.report.metric == TargetMetric::loss ? "loss" : "grad_norm"},
                 {"target", ec.report.target}};
  j["per_client_columns"] = ec.per_client_columns;
  return j.dump(indent);
}

}  // namespace fedback
