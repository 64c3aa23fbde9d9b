#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <unistd.h>

#include "qshift/backend.hpp"
#include "qshift/experiments.hpp"
#include "qshift/job.hpp"

using namespace qshift;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qshift_backend_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Circuit measure_only() { return Circuit{1, {Measure{}}}; }

JobRecord sample_job(int sweeps = 10) {
  NoiseConfig noise = NoiseConfig::ideal(1);
  noise.delta[0] = 0.04;
  noise.readout.qubits[0] = {0.95, 0.92};
  SimulatorBackend backend(noise);
  SweepSpec spec;
  spec.shots = 512;
  return run_job(backend, spec, sweeps, 21);
}

}  // namespace

TEST(Simulator, NoiselessMeasure) {
  SimulatorBackend backend(NoiseConfig::ideal(1));
  EXPECT_EQ(backend.run(measure_only(), 100, 1), (Counts{100, 0}));
}

TEST(Simulator, DeterministicForSeed) {
  NoiseConfig noise = NoiseConfig::ideal(2);
  noise.delta = {0.05, -0.02};
  noise.readout.qubits = {{0.9, 0.85}, {0.97, 0.93}};
  SimulatorBackend backend(noise);
  const Circuit c = chsh_circuit(ChshSetting::ab_prime);
  EXPECT_EQ(backend.run(c, 4096, 77), backend.run(c, 4096, 77));
  EXPECT_NE(backend.run(c, 4096, 77), backend.run(c, 4096, 78));
}

TEST(Simulator, CapabilityExceeded) {
  SimulatorBackend backend(NoiseConfig::ideal(1));
  EXPECT_EQ(backend.capability().n_qubits_max, 1);
  EXPECT_TRUE(backend.capability().supports_noise_injection);
  try {
    backend.run(Circuit{2, {CX{0, 1}}}, 10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::capability_exceeded);
  }
}

TEST(Simulator, ExactProbabilitiesIncludeNoise) {
  NoiseConfig noise = NoiseConfig::ideal(1);
  noise.delta[0] = 0.05;
  noise.readout.qubits[0] = {0.9, 0.8};
  SimulatorBackend backend(noise);
  const double t = 1.2;
  const auto p = backend.exact_probabilities(Circuit{1, {U3{0, t, -pi / 2, pi / 2}, Measure{}}});
  ASSERT_TRUE(p);
  EXPECT_NEAR((*p)[0], noisy_p0_orr(t, 0.05, {0.9, 0.8}), 1e-12);
}

TEST(Simulator, OneQubitCircuitOnTwoQubitNoise) {
  NoiseConfig noise = NoiseConfig::ideal(2);
  noise.readout.qubits[0] = {0.9, 0.9};
  SimulatorBackend backend(noise);
  const auto p = backend.exact_probabilities(measure_only());
  ASSERT_TRUE(p);
  ASSERT_EQ(p->size(), 2u);
  EXPECT_NEAR((*p)[0], 0.9, 1e-15);
}

TEST(Fingerprint, StableUnderTinyPerturbations) {
  const Circuit a{1, {U3{0, 1.0, 0.2, -0.3}, Measure{}}};
  const Circuit b{1, {U3{0, 1.0 + 1e-14, 0.2 - 1e-15, -0.3}, Measure{}}};
  const Circuit c{1, {U3{0, 1.0 + 1e-9, 0.2, -0.3}, Measure{}}};
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  EXPECT_NE(fingerprint(a), fingerprint(c));
  EXPECT_EQ(fingerprint(a).size(), 16u);
  EXPECT_EQ(fingerprint(Circuit{1, {VirtualZ{0, 0.0}}}), fingerprint(Circuit{1, {VirtualZ{0, -0.0}}}));
  EXPECT_NE(fingerprint(Circuit{1, {}}), fingerprint(Circuit{2, {}}));
}

TEST(Fingerprint, KnownHash) {
  // FNV-1a 64 of the empty string and of "a"
  EXPECT_EQ(detail::fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(detail::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(canonical_form(Circuit{1, {U3{0, 0.5, 0, 0}, Measure{}}}),
            "n=1;u3(0,0.500000000000,0.000000000000,0.000000000000);measure");
}

TEST(CircuitJson, RoundTrip) {
  const Circuit c{2, {U3{0, 1.1, 0.3, -0.9}, VirtualZ{1, 0.4}, RxPulse{1, -1, 0.02}, CX{0, 1}, Measure{}}};
  const Circuit back = circuit_from_json(circuit_to_json(c));
  EXPECT_EQ(back.n_qubits, c.n_qubits);
  EXPECT_EQ(back.ops, c.ops);
}

TEST(CircuitJson, Rejects) {
  EXPECT_THROW(circuit_from_json(nlohmann::ordered_json::parse(R"({"n_qubits":1,"ops":[{"op":"swap"}]})")), Error);
  EXPECT_THROW(circuit_from_json(nlohmann::ordered_json::parse(R"({"ops":[]})")), Error);
  EXPECT_THROW(
      circuit_from_json(nlohmann::ordered_json::parse(R"({"n_qubits":1,"ops":[{"op":"u3","qubit":3,"theta":1}]})")),
      Error);
}

TEST(RecordReplay, ReplayReturnsStoredCounts) {
  NoiseConfig noise = NoiseConfig::ideal(1);
  noise.delta[0] = 0.03;
  SimulatorBackend sim(noise);
  RecordStore store;
  RecordingBackend rec(sim, store);
  const Circuit c{1, {U3{0, 0.9, -pi / 2, pi / 2}, Measure{}}};
  const Counts original = rec.run(c, 1000, 5);
  EXPECT_EQ(store.size(), 1u);

  const auto path = scratch("records.json");
  store.save(path.string());
  const auto first = slurp(path);
  ReplayBackend replay(RecordStore::load(path.string()));
  EXPECT_EQ(replay.run(c, 1000, 5), original);

  // the reloaded store writes the same bytes
  RecordStore::load(path.string()).save(path.string());
  EXPECT_EQ(slurp(path), first);
}

TEST(RecordReplay, MissNamesFingerprint) {
  ReplayBackend replay{RecordStore{}};
  const Circuit c{1, {U3{0, 0.9, 0, 0}, Measure{}}};
  try {
    replay.run(c, 100, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_record);
    EXPECT_NE(std::string(e.what()).find(fingerprint(c)), std::string::npos);
  }
  EXPECT_FALSE(replay.exact_probabilities(c));
}

TEST(RecordReplay, SchemaVersionChecked) {
  auto j = RecordStore{}.to_json();
  j["schema_version"] = 99;
  try {
    RecordStore::from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::schema_version);
  }
}

TEST(RecordReplay, FitsAreBitIdentical) {
  NoiseConfig noise = NoiseConfig::ideal(1);
  noise.delta[0] = 0.06;
  noise.readout.qubits[0] = {0.93, 0.9};
  SimulatorBackend sim(noise);
  RecordStore store;
  RecordingBackend rec(sim, store);
  SweepSpec spec;
  spec.shots = 2048;
  const auto live = run_job(rec, spec, 3, 99);
  ReplayBackend replay(std::move(store), noise);
  const auto again = run_job(replay, spec, 3, 99);
  EXPECT_EQ(live.sweeps, again.sweeps);
  const auto a = fit_job(live), b = fit_job(again);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.shift.size(); ++i) EXPECT_EQ(a.shift[i].alpha, b.shift[i].alpha);
}

TEST(JobStore, RoundTrip) {
  auto job = sample_job();
  job.fits = fit_job(job);
  job.metadata["note"] = "round trip";
  const auto path = scratch("job.json");
  store_job(job, path.string());
  const auto back = load_job(path.string());
  EXPECT_EQ(back, job);
  ASSERT_EQ(back.sweeps.size(), 10u);
  EXPECT_EQ(back.sweeps[0].thetas.size(), 31u);
}

TEST(JobStore, RoundTripWithFlaggedFit) {
  JobRecord job;
  job.job_id = "flat";
  job.backend_id = "test";
  job.timestamp = "2020-01-01T00:00:00Z";
  job.noise_config = NoiseConfig::ideal(1);
  SweepRecord s;
  s.thetas = theta_grid(8);
  s.p0_estimates.assign(8, 0.5);
  job.sweeps = {s};
  job.fits = fit_job(job);
  ASSERT_TRUE(job.fits->shift[0].flagged);
  const auto back = job_from_json(job_to_json(job));
  EXPECT_EQ(back, job);
}

TEST(JobStore, RejectsUnknownSchema) {
  auto j = job_to_json(sample_job(1));
  j["schema_version"] = 7;
  const auto path = scratch("bad.json");
  std::ofstream(path) << j.dump();
  try {
    load_job(path.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::schema_version);
  }
  j.erase("schema_version");
  EXPECT_THROW(job_from_json(j), Error);
}

TEST(JobStore, Errors) {
  EXPECT_THROW(load_job("/nonexistent/dir/job.json"), Error);
  auto j = job_to_json(sample_job(2));
  j["sweeps"][1]["thetas"][3] = 0.123;
  EXPECT_THROW(job_from_json(j), Error);
  j["sweeps"] = nlohmann::ordered_json::array();
  EXPECT_THROW(job_from_json(j), Error);
  try {
    store_job(sample_job(1), "/nonexistent/dir/job.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}
