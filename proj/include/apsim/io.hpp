#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "json.hpp"

#include "apsim/ccpomdp.hpp"
#include "apsim/config.hpp"
#include "apsim/evaluation.hpp"
#include "apsim/maxent_agent.hpp"

namespace apsim {

inline constexpr const char* kToolVersion = "1.0.0";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path + "'");
  }
}

// ---------------------------------------------------------------------------
// Soft-Q model files
// ---------------------------------------------------------------------------

struct ModelMetadata {
  std::string kind = "agent";  // "agent" or "adversary"
  std::string features;
  std::string actions;
  double gamma = 0.95;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  int start_distance = 12;
  int horizon = 10;
};

/// Versioned text form: header lines, then one `param <weight|bias> <layer>
/// <rows> [<cols>]` line per block followed by its values in row-major
/// order, each printed with 17 significant digits.
inline std::string serialize_network(const Mlp& net, double sigma, const ModelMetadata& meta) {
  std::ostringstream out;
  out << "apsim-softq-model v1\n";
  out << "kind " << meta.kind << "\n";
  out << "features " << meta.features << "\n";
  out << "actions " << meta.actions << "\n";
  out << "layers";
  for (int s : net.layer_sizes()) out << ' ' << s;
  out << "\n";
  out << "sigma " << format_double(sigma) << "\n";
  out << "gamma " << format_double(meta.gamma) << "\n";
  out << "eta " << format_double(meta.eta) << "\n";
  out << "seed " << meta.seed << "\n";
  out << "config_hash " << meta.config_hash << "\n";
  out << "start_distance " << meta.start_distance << "\n";
  out << "horizon " << meta.horizon << "\n";
  const auto params = net.parameters();
  const auto& sizes = net.layer_sizes();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t rows = static_cast<std::size_t>(sizes[l + 1]);
    const std::size_t cols = static_cast<std::size_t>(sizes[l]);
    out << "param weight " << l << ' ' << rows << ' ' << cols << "\n";
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        out << (c ? " " : "") << format_double(params[net.weight_offset(l) + r * cols + c]);
      }
      out << "\n";
    }
    out << "param bias " << l << ' ' << rows << "\n";
    for (std::size_t r = 0; r < rows; ++r) {
      out << (r ? " " : "") << format_double(params[net.bias_offset(l) + r]);
    }
    out << "\n";
  }
  out << "end\n";
  return out.str();
}

struct LoadedNetwork {
  Mlp net;
  double sigma = 0.25;
  ModelMetadata meta;
};

inline LoadedNetwork parse_network(const std::string& text, const std::string& origin = "<model>") {
  std::istringstream in(text);
  auto fail = [&](const std::string& what) -> IoError {
    return IoError("malformed model file " + origin + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line) || line != "apsim-softq-model v1") throw fail("bad magic line");
  LoadedNetwork out;
  std::vector<int> sizes;
  for (;;) {
    const auto pos = in.tellg();
    if (!std::getline(in, line)) throw fail("truncated header");
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "param") {
      in.seekg(pos);
      break;
    }
    if (key == "kind") ls >> out.meta.kind;
    else if (key == "features") ls >> out.meta.features;
    else if (key == "actions") ls >> out.meta.actions;
    else if (key == "layers") {
      int s;
      while (ls >> s) sizes.push_back(s);
      if (!ls.eof()) throw fail("bad value for 'layers'");
      continue;
    } else if (key == "sigma") ls >> out.sigma;
    else if (key == "gamma") ls >> out.meta.gamma;
    else if (key == "eta") ls >> out.meta.eta;
    else if (key == "seed") ls >> out.meta.seed;
    else if (key == "config_hash") ls >> out.meta.config_hash;
    else if (key == "start_distance") ls >> out.meta.start_distance;
    else if (key == "horizon") ls >> out.meta.horizon;
    else throw fail("unknown header key '" + key + "'");
    if (ls.fail()) throw fail("bad value for '" + key + "'");
  }
  if (sizes.size() < 2) throw fail("missing layer sizes");
  try {
    out.net = Mlp(sizes);
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }
  auto params = out.net.parameters();
  for (std::size_t l = 0; l < out.net.num_layers(); ++l) {
    for (const char* block : {"weight", "bias"}) {
      std::string tag, kind;
      std::size_t layer = 0, rows = 0, cols = 1;
      in >> tag >> kind >> layer >> rows;
      const bool is_weight = std::string(block) == "weight";
      if (is_weight) in >> cols;
      if (!in || tag != "param" || kind != block || layer != l ||
          rows != static_cast<std::size_t>(sizes[l + 1]) ||
          (is_weight && cols != static_cast<std::size_t>(sizes[l]))) {
        throw fail("unexpected block header for layer " + std::to_string(l));
      }
      const std::size_t offset = is_weight ? out.net.weight_offset(l) : out.net.bias_offset(l);
      for (std::size_t i = 0; i < rows * cols; ++i) {
        std::string tok;
        if (!(in >> tok)) throw fail("truncated parameter block");
        char* end = nullptr;
        params[offset + i] = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') throw fail("bad number '" + tok + "'");
      }
    }
  }
  std::string end_tag;
  if (!(in >> end_tag) || end_tag != "end") throw fail("missing end marker");
  return out;
}

inline ModelMetadata agent_metadata(const ExperimentConfig& cfg, std::uint64_t seed) {
  ModelMetadata m;
  m.kind = "agent";
  m.features = "belief,distance/" + std::to_string(cfg.start_distance) + ",round/" + std::to_string(cfg.horizon);
  m.actions = "hand,loudspeaker,flare";
  m.gamma = cfg.gamma;
  m.seed = seed;
  m.config_hash = config_hash(cfg);
  m.start_distance = cfg.start_distance;
  m.horizon = cfg.horizon;
  return m;
}

inline ModelMetadata adversary_metadata(const ExperimentConfig& cfg, std::uint64_t seed, double eta) {
  ModelMetadata m = agent_metadata(cfg, seed);
  m.kind = "adversary";
  m.features = "belief,hand,loudspeaker,flare,distance/" + std::to_string(cfg.start_distance) + ",round/" +
               std::to_string(cfg.horizon);
  m.actions = "stay,proceed";
  m.eta = eta;
  return m;
}

template <std::size_t In, std::size_t Out>
SoftQNetwork<In, Out> network_from(const LoadedNetwork& loaded, const std::string& origin) {
  if (loaded.net.input_size() != In || loaded.net.output_size() != Out) {
    throw IoError("model file " + origin + " has the wrong input/output shape");
  }
  return {loaded.net, loaded.sigma};
}

// ---------------------------------------------------------------------------
// CC-POMDP policy files
// ---------------------------------------------------------------------------

inline std::string serialize_policy(const BeliefGrid& grid, const std::string& hash) {
  const Scenario& s = grid.scenario();
  std::ostringstream out;
  out << "apsim-ccpomdp-policy v1\n";
  out << "grid_size " << grid.lattice().size() << "\n";
  out << "epsilon " << format_double(grid.uncertainty().epsilon) << "\n";
  out << "variance " << format_double(grid.uncertainty().variance) << "\n";
  out << "gamma " << format_double(s.gamma) << "\n";
  out << "prior " << format_double(s.prior) << "\n";
  out << "start_distance " << s.start_distance << "\n";
  out << "horizon " << s.horizon << "\n";
  out << "config_hash " << hash << "\n";
  for (int t = 0; t < s.horizon; ++t) {
    for (int d = s.start_distance - t; d <= s.start_distance; ++d) {
      out << "layer " << t << ' ' << d << "\n";
      for (std::size_t i = 0; i < grid.lattice().size(); ++i) out << (i ? " " : "") << index(grid.action(t, d, i));
      out << "\n";
      for (std::size_t i = 0; i < grid.lattice().size(); ++i) out << (i ? " " : "") << format_double(grid.value(t, d, i));
      out << "\n";
    }
  }
  out << "end\n";
  return out.str();
}

inline BeliefGrid parse_policy(const std::string& text, const std::string& origin = "<policy>") {
  std::istringstream in(text);
  auto fail = [&](const std::string& what) -> IoError {
    return IoError("malformed policy file " + origin + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line) || line != "apsim-ccpomdp-policy v1") throw fail("bad magic line");
  std::size_t grid_size = 0;
  UncertaintyModel um;
  Scenario s;
  std::string hash;
  const char* keys[] = {"grid_size", "epsilon", "variance", "gamma", "prior", "start_distance", "horizon", "config_hash"};
  for (const char* expected : keys) {
    std::string key;
    in >> key;
    if (key != expected) throw fail(std::string("expected '") + expected + "'");
    if (key == "grid_size") in >> grid_size;
    else if (key == "epsilon") in >> um.epsilon;
    else if (key == "variance") in >> um.variance;
    else if (key == "gamma") in >> s.gamma;
    else if (key == "prior") in >> s.prior;
    else if (key == "start_distance") in >> s.start_distance;
    else if (key == "horizon") in >> s.horizon;
    else in >> hash;
    if (!in) throw fail("bad value for '" + key + "'");
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }
  if (grid_size < 2) throw fail("grid_size must be >= 2");
  BeliefGrid grid(s, grid_size, um);
  for (int t = 0; t < s.horizon; ++t) {
    for (int d = s.start_distance - t; d <= s.start_distance; ++d) {
      std::string tag;
      int lt = -1, ld = -1;
      in >> tag >> lt >> ld;
      if (!in || tag != "layer" || lt != t || ld != d) throw fail("unexpected layer header");
      for (std::size_t i = 0; i < grid_size; ++i) {
        int a = -1;
        if (!(in >> a) || a < 0 || a >= static_cast<int>(kNumAgentActions)) throw fail("bad action entry");
        grid.action(t, d, i) = agent_action_at(static_cast<std::size_t>(a));
      }
      for (std::size_t i = 0; i < grid_size; ++i) {
        std::string tok;
        if (!(in >> tok)) throw fail("truncated value row");
        char* end = nullptr;
        grid.value(t, d, i) = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') throw fail("bad number '" + tok + "'");
      }
    }
  }
  std::string end_tag;
  if (!(in >> end_tag) || end_tag != "end") throw fail("missing end marker");
  return grid;
}

/// Agent from either a soft-Q model file or a CC-POMDP policy file, told
/// apart by the magic line. The label is "maxent" or "ccpomdp".
inline Agent load_agent(const std::string& path) {
  const std::string text = read_file(path);
  if (text.rfind("apsim-softq-model", 0) == 0) {
    const LoadedNetwork loaded = parse_network(text, path);
    if (loaded.meta.kind != "agent") throw IoError("model file " + path + " is not an agent model");
    Scenario s;
    s.start_distance = loaded.meta.start_distance;
    s.horizon = loaded.meta.horizon;
    s.gamma = loaded.meta.gamma;
    auto net = std::make_shared<const AgentNetwork>(network_from<kAgentFeatures, kNumAgentActions>(loaded, path));
    return {"maxent", maxent_policy(net, s)};
  }
  if (text.rfind("apsim-ccpomdp-policy", 0) == 0) {
    auto grid = std::make_shared<const BeliefGrid>(parse_policy(text, path));
    return {"ccpomdp", cc_agent_policy(grid)};
  }
  throw IoError("'" + path + "' is neither a soft-Q model nor a CC-POMDP policy file");
}

inline std::shared_ptr<const LearningAdversary> load_learning_adversary(const std::string& path) {
  const LoadedNetwork loaded = parse_network(read_file(path), path);
  if (loaded.meta.kind != "adversary") throw IoError("model file " + path + " is not an adversary model");
  auto adv = std::make_shared<LearningAdversary>();
  adv->network = network_from<kAdversaryFeatures, kNumOpponentActions>(loaded, path);
  adv->eta = loaded.meta.eta;
  adv->scenario.start_distance = loaded.meta.start_distance;
  adv->scenario.horizon = loaded.meta.horizon;
  adv->scenario.gamma = loaded.meta.gamma;
  return adv;
}

/// `neutral`, `population`, `generative:a,b`, `deceptive:t` or `learning:path`.
inline AdversarySpec parse_adversary_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto number = [&](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end == s.c_str() || *end != '\0' || !std::isfinite(v)) {
      throw ConfigError("bad number '" + s + "' in adversary spec '" + text + "'");
    }
    return v;
  };
  try {
    if (kind == "neutral" && colon == std::string::npos) return AdversarySpec::neutral();
    if (kind == "population" && colon == std::string::npos) return AdversarySpec::population();
    if (kind == "generative") {
      const auto comma = arg.find(',');
      if (comma == std::string::npos) throw ConfigError("generative spec needs 'alpha,beta'");
      return AdversarySpec::generative({number(arg.substr(0, comma)), number(arg.substr(comma + 1))});
    }
    if (kind == "deceptive") return AdversarySpec::deceptive_threshold(number(arg));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid adversary spec '") + text + "': " + e.what());
  }
  if (kind == "learning" && !arg.empty()) return AdversarySpec::learned(load_learning_adversary(arg));
  throw ConfigError("unrecognized adversary spec '" + text + "'");
}

// ---------------------------------------------------------------------------
// Metrics CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kMetricsHeader =
    "agent,adversary,param_name,param_value,episodes,clap_mean,clap_stderr,tpr_mean,tpr_stderr,u_p,seed_list";

inline std::string seed_list(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? ";" : "") + std::to_string(seeds[i]);
  return out;
}

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricsRow& r : rows) {
    out += r.agent + "," + r.adversary + "," + r.param_name + "," + format_double(r.param_value) + "," +
           std::to_string(r.episodes) + "," + format_double(r.clap_mean) + "," + format_double(r.clap_stderr) + "," +
           format_double(r.tpr_mean) + "," + format_double(r.tpr_stderr) + "," + format_double(r.u_p) + "," +
           seed_list(r.seeds) + "\n";
  }
  return out;
}

/// Parses and schema-checks a metrics CSV (exact header, 11 typed columns).
inline std::vector<MetricsRow> parse_metrics_csv(const std::string& text, const std::string& origin = "<csv>") {
  std::istringstream in(text);
  auto fail = [&](std::size_t line_no, const std::string& what) -> ConfigError {
    return ConfigError("metrics CSV " + origin + " line " + std::to_string(line_no) + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw fail(1, "header does not match the metrics schema");
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 11) throw fail(line_no, "expected 11 columns, found " + std::to_string(cells.size()));
    auto real = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0') throw fail(line_no, "'" + s + "' is not a number");
      return v;
    };
    MetricsRow r;
    r.agent = cells[0];
    r.adversary = cells[1];
    r.param_name = cells[2];
    if (r.agent.empty() || r.adversary.empty() || r.param_name.empty()) throw fail(line_no, "empty label column");
    r.param_value = real(cells[3]);
    char* end = nullptr;
    r.episodes = std::strtol(cells[4].c_str(), &end, 10);
    if (cells[4].empty() || *end != '\0' || r.episodes <= 0) throw fail(line_no, "episodes must be a positive integer");
    r.clap_mean = real(cells[5]);
    r.clap_stderr = real(cells[6]);
    r.tpr_mean = real(cells[7]);
    r.tpr_stderr = real(cells[8]);
    r.u_p = real(cells[9]);
    if (r.clap_stderr < 0.0 || r.tpr_stderr < 0.0) throw fail(line_no, "negative standard error");
    std::istringstream ss(cells[10]);
    std::string tok;
    while (std::getline(ss, tok, ';')) {
      char* e2 = nullptr;
      const auto v = std::strtoull(tok.c_str(), &e2, 10);
      if (tok.empty() || *e2 != '\0') throw fail(line_no, "bad seed '" + tok + "'");
      r.seeds.push_back(v);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

/// Manifest JSON with a content hash per output; timestamps are the only
/// fields that differ between identical runs.
inline nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& path : m.outputs) {
    outputs.push_back({{"path", path}, {"fnv1a", hex64(fnv1a(read_file(path)))}});
  }
  return {{"tool", "apsim"},          {"version", kToolVersion}, {"command", m.command},
          {"config_hash", m.config_hash}, {"seeds", m.seeds},     {"started", m.started},
          {"finished", m.finished},   {"outputs", outputs}};
}

inline void write_manifest(const RunManifest& m) {
  if (m.outputs.empty()) throw IoError("manifest needs at least one output");
  write_file_atomic(manifest_path(m.outputs.front()), manifest_json(m).dump(2) + "\n");
}

}  // namespace apsim
