#pragma once

// Execution backends: a noisy statevector simulator and a record/replay pair
// that persists counts so stored (or hardware) data runs through the same
// analysis path.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qshift/core.hpp"
#include "qshift/error.hpp"
#include "qshift/noise.hpp"

namespace qshift {

inline constexpr int kRecordSchemaVersion = 1;

namespace detail {

inline std::string canonical_number(double x) {
  double r = std::round(x * 1e12) / 1e12;
  if (r == 0.0) r = 0.0;  // drop negative zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12f", r);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

/// Canonical text form of a circuit: qubit count and every op with its
/// parameters rounded to 12 decimals.
inline std::string canonical_form(const Circuit& circuit) {
  using detail::canonical_number;
  std::string out = "n=" + std::to_string(circuit.n_qubits);
  for (const auto& op : circuit.ops) {
    out += ';';
    std::visit(
        [&](const auto& g) {
          using T = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<T, U3>) {
            out += "u3(" + std::to_string(g.qubit) + "," + canonical_number(g.theta) + "," + canonical_number(g.phi) +
                   "," + canonical_number(g.lambda) + ")";
          } else if constexpr (std::is_same_v<T, VirtualZ>) {
            out += "vz(" + std::to_string(g.qubit) + "," + canonical_number(g.angle) + ")";
          } else if constexpr (std::is_same_v<T, RxPulse>) {
            out += "rx(" + std::to_string(g.qubit) + "," + std::to_string(g.sign) + "," + canonical_number(g.delta) + ")";
          } else if constexpr (std::is_same_v<T, CX>) {
            out += "cx(" + std::to_string(g.control) + "," + std::to_string(g.target) + ")";
          } else {
            out += "measure";
          }
        },
        op);
  }
  return out;
}

/// FNV-1a 64 of the canonical form, as 16 lowercase hex digits.
inline std::string fingerprint(const Circuit& circuit) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a64(canonical_form(circuit))));
  return buf;
}

/// Circuit files: {"n_qubits": 2, "ops": [{"op": "u3", "qubit": 0, "theta": ..,
/// "phi": .., "lambda": ..}, {"op": "vz", "qubit": 0, "angle": ..},
/// {"op": "rx", "qubit": 0, "sign": 1, "delta": ..}, {"op": "cx", "control": 0,
/// "target": 1}, {"op": "measure"}]}
inline nlohmann::ordered_json circuit_to_json(const Circuit& circuit) {
  nlohmann::ordered_json ops = nlohmann::ordered_json::array();
  for (const auto& op : circuit.ops) {
    std::visit(
        [&](const auto& g) {
          using T = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<T, U3>)
            ops.push_back({{"op", "u3"}, {"qubit", g.qubit}, {"theta", g.theta}, {"phi", g.phi}, {"lambda", g.lambda}});
          else if constexpr (std::is_same_v<T, VirtualZ>)
            ops.push_back({{"op", "vz"}, {"qubit", g.qubit}, {"angle", g.angle}});
          else if constexpr (std::is_same_v<T, RxPulse>)
            ops.push_back({{"op", "rx"}, {"qubit", g.qubit}, {"sign", g.sign}, {"delta", g.delta}});
          else if constexpr (std::is_same_v<T, CX>)
            ops.push_back({{"op", "cx"}, {"control", g.control}, {"target", g.target}});
          else
            ops.push_back({{"op", "measure"}});
        },
        op);
  }
  return {{"n_qubits", circuit.n_qubits}, {"ops", ops}};
}

inline Circuit circuit_from_json(const nlohmann::ordered_json& j) {
  Circuit c;
  try {
    c.n_qubits = j.at("n_qubits").get<int>();
    for (const auto& o : j.at("ops")) {
      const auto kind = o.at("op").get<std::string>();
      if (kind == "u3")
        c.add(U3{o.at("qubit").get<int>(), o.at("theta").get<double>(), o.value("phi", 0.0), o.value("lambda", 0.0)});
      else if (kind == "vz")
        c.add(VirtualZ{o.at("qubit").get<int>(), o.at("angle").get<double>()});
      else if (kind == "rx")
        c.add(RxPulse{o.at("qubit").get<int>(), o.at("sign").get<int>(), o.value("delta", 0.0)});
      else if (kind == "cx")
        c.add(CX{o.at("control").get<int>(), o.at("target").get<int>()});
      else if (kind == "measure")
        c.add(Measure{});
      else
        throw Error(ErrorKind::invalid_circuit, "unknown op '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_circuit, std::string("malformed circuit: ") + e.what());
  }
  c.validate();
  return c;
}

struct BackendCapability {
  int n_qubits_max = kMaxQubits;
  bool supports_noise_injection = false;
  std::string id;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendCapability capability() const = 0;

  /// Executes `circuit` for `shots` shots. Implementations are safe to call
  /// concurrently.
  virtual Counts run(const Circuit& circuit, std::int64_t shots, std::uint64_t seed) const = 0;

  /// Exact noisy outcome distribution, when the backend can compute one.
  virtual std::optional<std::vector<double>> exact_probabilities(const Circuit&) const { return std::nullopt; }

  virtual std::optional<NoiseConfig> noise_config() const { return std::nullopt; }

 protected:
  void check_capability(const Circuit& circuit) const {
    circuit.validate();
    const auto cap = capability();
    if (circuit.n_qubits > cap.n_qubits_max)
      throw Error(ErrorKind::capability_exceeded, cap.id + " supports at most " + std::to_string(cap.n_qubits_max) +
                                                      " qubits, circuit has " + std::to_string(circuit.n_qubits));
  }
};

/// Statevector simulator with off-resonance pulses and readout confusion.
/// U3 ops are lowered to physical pulses carrying the qubit's δ, the state
/// is evolved exactly, readout confusion is applied to the probabilities,
/// and counts are sampled.
class SimulatorBackend final : public Backend {
 public:
  explicit SimulatorBackend(NoiseConfig noise, std::string id = "simulator")
      : noise_(std::move(noise)), id_(std::move(id)) {
    noise_.validate();
    if (noise_.n_qubits() < 1 || noise_.n_qubits() > kMaxQubits)
      throw Error(ErrorKind::invalid_parameter, "simulator noise config must cover 1 or 2 qubits");
  }

  BackendCapability capability() const override { return {noise_.n_qubits(), true, id_}; }

  std::optional<NoiseConfig> noise_config() const override { return noise_; }

  std::optional<std::vector<double>> exact_probabilities(const Circuit& circuit) const override {
    check_capability(circuit);
    const auto lowered = lower_to_pulses(circuit, noise_.delta);
    return apply_readout(noise_.readout.first(circuit.n_qubits), ideal_probabilities(lowered));
  }

  Counts run(const Circuit& circuit, std::int64_t shots, std::uint64_t seed) const override {
    return sample_counts(*exact_probabilities(circuit), shots, seed);
  }

 private:
  NoiseConfig noise_;
  std::string id_;
};

/// Counts keyed by (circuit fingerprint, shots, seed).
class RecordStore {
 public:
  explicit RecordStore(std::string backend_id = "") : backend_id_(std::move(backend_id)) {}

  static std::string key(const std::string& fp, std::int64_t shots, std::uint64_t seed) {
    return fp + "/" + std::to_string(shots) + "/" + std::to_string(seed);
  }

  void put(const Circuit& circuit, std::int64_t shots, std::uint64_t seed, Counts counts) {
    std::lock_guard lock(*mutex_);
    records_[key(fingerprint(circuit), shots, seed)] = Entry{fingerprint(circuit), shots, seed, std::move(counts)};
  }

  std::optional<Counts> get(const Circuit& circuit, std::int64_t shots, std::uint64_t seed) const {
    std::lock_guard lock(*mutex_);
    const auto it = records_.find(key(fingerprint(circuit), shots, seed));
    if (it == records_.end()) return std::nullopt;
    return it->second.counts;
  }

  std::size_t size() const {
    std::lock_guard lock(*mutex_);
    return records_.size();
  }

  const std::string& backend_id() const { return backend_id_; }
  void set_backend_id(std::string id) { backend_id_ = std::move(id); }

  nlohmann::ordered_json to_json() const {
    std::lock_guard lock(*mutex_);
    nlohmann::ordered_json j;
    j["schema_version"] = kRecordSchemaVersion;
    j["backend_id"] = backend_id_;
    auto& arr = j["records"] = nlohmann::ordered_json::array();
    for (const auto& [k, e] : records_)
      arr.push_back({{"fingerprint", e.fingerprint}, {"shots", e.shots}, {"seed", e.seed}, {"counts", e.counts}});
    return j;
  }

  static RecordStore from_json(const nlohmann::ordered_json& j) {
    const int version = j.value("schema_version", -1);
    if (version != kRecordSchemaVersion)
      throw Error(ErrorKind::schema_version, "record store schema_version " + std::to_string(version) +
                                                 " (expected " + std::to_string(kRecordSchemaVersion) + ")");
    RecordStore store(j.value("backend_id", std::string{}));
    for (const auto& r : j.at("records")) {
      Entry e{r.at("fingerprint").get<std::string>(), r.at("shots").get<std::int64_t>(),
              r.at("seed").get<std::uint64_t>(), r.at("counts").get<Counts>()};
      store.records_[key(e.fingerprint, e.shots, e.seed)] = std::move(e);
    }
    return store;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out << to_json().dump(2) << '\n';
  }

  static RecordStore load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path);
    try {
      return from_json(nlohmann::ordered_json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::io, path + ": " + e.what());
    }
  }

 private:
  struct Entry {
    std::string fingerprint;
    std::int64_t shots = 0;
    std::uint64_t seed = 0;
    Counts counts;
  };

  std::string backend_id_;
  std::map<std::string, Entry> records_;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

/// Forwards to `inner` and stores every result.
class RecordingBackend final : public Backend {
 public:
  RecordingBackend(const Backend& inner, RecordStore& store) : inner_(inner), store_(store) {
    store_.set_backend_id(inner_.capability().id);
  }

  BackendCapability capability() const override { return inner_.capability(); }
  std::optional<NoiseConfig> noise_config() const override { return inner_.noise_config(); }

  Counts run(const Circuit& circuit, std::int64_t shots, std::uint64_t seed) const override {
    auto counts = inner_.run(circuit, shots, seed);
    store_.put(circuit, shots, seed, counts);
    return counts;
  }

 private:
  const Backend& inner_;
  RecordStore& store_;
};

/// Serves stored counts; a lookup miss is an error naming the fingerprint.
class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(RecordStore store, std::optional<NoiseConfig> noise = std::nullopt)
      : store_(std::move(store)), noise_(std::move(noise)) {}

  BackendCapability capability() const override {
    return {kMaxQubits, false, store_.backend_id().empty() ? "replay" : store_.backend_id()};
  }
  std::optional<NoiseConfig> noise_config() const override { return noise_; }

  Counts run(const Circuit& circuit, std::int64_t shots, std::uint64_t seed) const override {
    check_capability(circuit);
    auto counts = store_.get(circuit, shots, seed);
    if (!counts)
      throw Error(ErrorKind::missing_record, "no stored counts for circuit " + fingerprint(circuit) + " (shots " +
                                                 std::to_string(shots) + ", seed " + std::to_string(seed) + ")");
    return *counts;
  }

 private:
  RecordStore store_;
  std::optional<NoiseConfig> noise_;
};

}  // namespace qshift
