#include "tailmem/config.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tailmem/text_io.h"

namespace tailmem {

namespace {

using Section = std::vector<std::pair<std::string, std::string>>;
using Sections = std::map<std::string, Section>;

void Set(Sections& sections, const std::string& section, const std::string& key, const std::string& value) {
  auto& entries = sections[section];
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

double Double(const std::string& name, const std::string& value) {
  double out = 0.0;
  if (!ParseDouble(Trim(value), out)) throw std::invalid_argument(name + ": not a number: '" + value + "'");
  return out;
}

int64_t Int(const std::string& name, const std::string& value) {
  long long out = 0;
  if (!ParseInt(Trim(value), out)) throw std::invalid_argument(name + ": not an integer: '" + value + "'");
  return out;
}

uint64_t U64(const std::string& name, const std::string& value) {
  const int64_t out = Int(name, value);
  if (out < 0) throw std::invalid_argument(name + ": must be >= 0");
  return static_cast<uint64_t>(out);
}

std::vector<double> DoubleList(const std::string& name, const std::string& value) {
  std::vector<double> out;
  for (const auto field : SplitFields(value, ',')) out.push_back(Double(name, std::string(Trim(field))));
  return out;
}

std::string JoinDoubles(const std::vector<double>& values) {
  std::string out;
  for (size_t k = 0; k < values.size(); ++k) out += (k ? "," : "") + FormatDouble(values[k]);
  return out;
}

void Apply(RunConfig& c, const Sections& sections) {
  std::vector<std::string> unknown;
  for (const auto& [section, entries] : sections) {
    if (section == "learner") {
      auto learner_entries = entries;
      bool has_kind = false;
      for (const auto& [k, v] : learner_entries) has_kind |= k == "kind";
      if (!has_kind) learner_entries.insert(learner_entries.begin(), {"kind", "knn"});
      c.learner = LearnerSpecFromKeyValues(learner_entries);
      continue;
    }
    for (const auto& [key, value] : entries) {
      const std::string name = section + "." + key;
      auto& s = c.synthetic;
      if (section == "run" && key == "output_dir") c.output_dir = value;
      else if (section == "dataset" && key == "source") c.source = value;
      else if (section == "dataset" && key == "train_csv") c.train_csv = value;
      else if (section == "dataset" && key == "test_csv") c.test_csv = value;
      else if (section == "dataset" && key == "num_classes") {
        if (value.empty()) c.num_classes.reset();
        else c.num_classes = static_cast<int>(Int(name, value));
      } else if (section == "dataset" && key == "n_subpop") s.n_subpop = static_cast<int>(Int(name, value));
      else if (section == "dataset" && key == "zipf_exponent") s.zipf_exponent = Double(name, value);
      else if (section == "dataset" && key == "n_train") s.n_train = static_cast<int>(Int(name, value));
      else if (section == "dataset" && key == "n_test") s.n_test = static_cast<int>(Int(name, value));
      else if (section == "dataset" && key == "dim") s.dim = static_cast<int>(Int(name, value));
      else if (section == "dataset" && key == "classes") s.num_classes = static_cast<int>(Int(name, value));
      else if (section == "dataset" && key == "cluster_sep") s.cluster_sep = Double(name, value);
      else if (section == "dataset" && key == "noise_rate") s.noise_rate = Double(name, value);
      else if (section == "dataset" && key == "seed") s.seed = U64(name, value);
      else if (section == "trials" && key == "mode") c.mode = value;
      else if (section == "trials" && key == "m_fraction") c.m_fraction = Double(name, value);
      else if (section == "trials" && key == "m") {
        if (value.empty()) c.m.reset();
        else c.m = U64(name, value);
      } else if (section == "trials" && key == "t") c.t = U64(name, value);
      else if (section == "trials" && key == "seed") c.seed = U64(name, value);
      else if (section == "trials" && key == "parallelism") c.parallelism = static_cast<int>(Int(name, value));
      else if (section == "trials" && key == "enumeration_cap") c.enumeration_cap = U64(name, value);
      else if (section == "select" && key == "theta_mem") c.theta_mem = Double(name, value);
      else if (section == "select" && key == "theta_infl") c.theta_infl = Double(name, value);
      else if (section == "select" && key == "sparse_floor") {
        if (value.empty()) c.sparse_floor.reset();
        else c.sparse_floor = Double(name, value);
      } else if (section == "select" && key == "n_copies") c.n_copies = static_cast<int>(Int(name, value));
      else if (section == "select" && key == "n_egs") c.n_egs = static_cast<int>(Int(name, value));
      else if (section == "experiment" && key == "thresholds") c.thresholds = DoubleList(name, value);
      else if (section == "experiment" && key == "repeats") c.repeats = static_cast<int>(Int(name, value));
      else if (section == "experiment" && key == "seed") c.experiment_seed = U64(name, value);
      else if (section == "experiment" && key == "oracle_sigma") c.oracle_sigma = Double(name, value);
      else unknown.push_back(name);
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw std::invalid_argument(msg);
  }
}

}  // namespace

uint64_t RunConfig::SubsetSize(uint64_t n) const {
  if (m) return *m;
  const auto size = static_cast<uint64_t>(std::llround(m_fraction * static_cast<double>(n)));
  return std::max<uint64_t>(1, std::min(size, n));
}

void RunConfig::Validate() const {
  if (source != "synthetic" && source != "csv") throw std::invalid_argument("dataset.source must be synthetic or csv");
  if (source == "synthetic") synthetic.Validate();
  if (source == "csv" && (train_csv.empty() || test_csv.empty())) {
    throw std::invalid_argument("dataset.train_csv and dataset.test_csv are required for csv input");
  }
  learner.Validate();
  if (mode != "sample" && mode != "enumerate") throw std::invalid_argument("trials.mode must be sample or enumerate");
  if (!(m_fraction > 0.0 && m_fraction < 1.0)) throw std::invalid_argument("trials.m_fraction must lie in (0, 1)");
  if (m && *m == 0) throw std::invalid_argument("trials.m must be >= 1");
  if (mode == "sample" && t == 0) throw std::invalid_argument("trials.t must be >= 1");
  if (parallelism < 1) throw std::invalid_argument("trials.parallelism must be >= 1");
  for (double theta : {theta_mem, theta_infl}) {
    if (!(theta >= -1.0 && theta <= 1.0)) throw std::invalid_argument("threshold out of range");
  }
  for (double theta : thresholds) {
    if (!(theta >= -1.0 && theta <= 1.0)) throw std::invalid_argument("threshold out of range");
  }
  if (sparse_floor && !(*sparse_floor >= -1.0 && *sparse_floor <= 1.0)) {
    throw std::invalid_argument("select.sparse_floor out of range");
  }
  if (n_copies < 1 || n_egs < 1) throw std::invalid_argument("select.n_copies and select.n_egs must be >= 1");
  if (repeats < 1) throw std::invalid_argument("experiment.repeats must be >= 1");
  if (!(oracle_sigma > 0.0 && oracle_sigma < 1.0)) throw std::invalid_argument("experiment.oracle_sigma must lie in (0, 1)");
}

RunConfig LoadConfig(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  Sections sections;
  if (path) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(path->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) throw ParseError("config: key '" + section + "' outside a section");
      for (const auto& [key, value] : body) Set(sections, section, key, value.data());
    }
  }
  if (const char* env = std::getenv(kParallelismEnv); env != nullptr && *env != '\0') {
    Set(sections, "trials", "parallelism", env);
  }
  for (const auto& item : overrides) {
    const size_t eq = item.find('=');
    const size_t dot = item.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw std::invalid_argument("override must look like section.key=value: '" + item + "'");
    }
    Set(sections, item.substr(0, dot), item.substr(dot + 1, eq - dot - 1), item.substr(eq + 1));
  }
  RunConfig config;
  Apply(config, sections);
  config.Validate();
  return config;
}

std::string EffectiveConfigText(const RunConfig& c) {
  const auto& s = c.synthetic;
  std::string out = "[run]\noutput_dir=" + c.output_dir.string() + "\n\n[dataset]\nsource=" + c.source + "\n";
  out += "train_csv=" + c.train_csv.string() + "\ntest_csv=" + c.test_csv.string() + "\n";
  out += "num_classes=" + (c.num_classes ? std::to_string(*c.num_classes) : std::string()) + "\n";
  out += "n_subpop=" + std::to_string(s.n_subpop) + "\nzipf_exponent=" + FormatDouble(s.zipf_exponent) + "\n";
  out += "n_train=" + std::to_string(s.n_train) + "\nn_test=" + std::to_string(s.n_test) + "\n";
  out += "dim=" + std::to_string(s.dim) + "\nclasses=" + std::to_string(s.num_classes) + "\n";
  out += "cluster_sep=" + FormatDouble(s.cluster_sep) + "\nnoise_rate=" + FormatDouble(s.noise_rate) + "\n";
  out += "seed=" + std::to_string(s.seed) + "\n\n[learner]\n" + SerializeLearnerSpec(c.learner) + "\n";
  out += "[trials]\nmode=" + c.mode + "\nm_fraction=" + FormatDouble(c.m_fraction) + "\n";
  out += "m=" + (c.m ? std::to_string(*c.m) : std::string()) + "\nt=" + std::to_string(c.t) + "\n";
  out += "seed=" + std::to_string(c.seed) + "\nparallelism=" + std::to_string(c.parallelism) + "\n";
  out += "enumeration_cap=" + std::to_string(c.enumeration_cap) + "\n\n[select]\n";
  out += "theta_mem=" + FormatDouble(c.theta_mem) + "\ntheta_infl=" + FormatDouble(c.theta_infl) + "\n";
  out += "sparse_floor=" + (c.sparse_floor ? FormatDouble(*c.sparse_floor) : std::string()) + "\n";
  out += "n_copies=" + std::to_string(c.n_copies) + "\nn_egs=" + std::to_string(c.n_egs) + "\n\n[experiment]\n";
  out += "thresholds=" + JoinDoubles(c.thresholds) + "\nrepeats=" + std::to_string(c.repeats) + "\n";
  out += "seed=" + std::to_string(c.experiment_seed) + "\noracle_sigma=" + FormatDouble(c.oracle_sigma) + "\n";
  return out;
}

}  // namespace tailmem
