#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "rfrl/iq.hpp"

using namespace rfrl;
using namespace rfrl::iq;

namespace {

// O(N^2) DFT with bins assigned by center frequency, written out directly.
std::vector<double> dft_band_energies(const std::vector<Sample>& x, std::size_t channels) {
  const std::size_t n = x.size();
  std::vector<double> out(channels, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    Sample acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * m % n) / static_cast<double>(n);
      acc += x[m] * Sample(std::cos(angle), std::sin(angle));
    }
    double f = static_cast<double>(k) / static_cast<double>(n);
    if (f >= 0.5) f -= 1.0;
    auto band = static_cast<std::size_t>((f + 0.5) * static_cast<double>(channels));
    out[std::min(band, channels - 1)] += std::norm(acc) / static_cast<double>(n);
  }
  return out;
}

std::vector<Sample> pure_tone(std::size_t n, double amplitude, double freq) {
  std::vector<Sample> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::polar(amplitude, 2.0 * std::numbers::pi * freq * static_cast<double>(i));
  return x;
}

double energy(const std::vector<Sample>& x) {
  double e = 0;
  for (auto s : x) e += std::norm(s);
  return e;
}

std::vector<std::size_t> occupied_channels(const std::vector<std::uint8_t>& occ) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < occ.size(); ++k) {
    if (occ[k]) out.push_back(k);
  }
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  IQConfig ok;
  CHECK_NOTHROW(ok.validate());
  auto bad = ok;
  bad.samples_per_step = 0;
  CHECK_THROWS(bad.validate());
  bad = ok;
  bad.noise_power = 0;
  CHECK_THROWS(bad.validate());
  bad = ok;
  bad.signal_power = -1;
  CHECK_THROWS(bad.validate());
  bad = ok;
  bad.ldapm_order = 32;
  CHECK_THROWS(bad.validate());
  bad = ok;
  bad.threshold_factor = 1.0;
  CHECK_THROWS(bad.validate());
  const std::vector<Assignment> out_of_range{{"x", 10, Modulation::Tone}};
  CHECK_THROWS(synth_step(out_of_range, 10, ok, 0));
}

TEST_CASE("band layout") {
  CHECK(band_center(0, 10) == doctest::Approx(-0.45));
  CHECK(band_center(9, 10) == doctest::Approx(0.45));
  std::vector<std::size_t> counts(10, 0);
  for (std::size_t b = 0; b < 1024; ++b) ++counts[band_of_bin(b, 1024, 10)];
  for (auto c : counts) CHECK((c == 102 || c == 103));
  CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 1024);
}

TEST_CASE("band_energies agrees with the direct DFT and with Parseval") {
  IQConfig cfg;
  cfg.samples_per_step = 240;
  const std::vector<Assignment> a{{"t", 1, Modulation::Tone}, {"l", 4, Modulation::Ldapm}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto frame = synth_step(a, 6, cfg, seed);
    const auto fast = band_energies(frame, 6);
    const auto slow = dft_band_energies(frame.samples, 6);
    for (std::size_t k = 0; k < 6; ++k) CHECK(fast[k] == doctest::Approx(slow[k]).epsilon(1e-9));
    const double total = std::accumulate(fast.begin(), fast.end(), 0.0);
    CHECK(std::abs(total - energy(frame.samples)) <= 1e-9 * energy(frame.samples));
  }
}

TEST_CASE("band_energies examples") {
  IQFrame zero;
  zero.samples.assign(1024, 0.0);
  for (double e : band_energies(zero, 10)) CHECK(e == 0.0);

  for (std::size_t k = 0; k < 10; ++k) {
    IQFrame tone{pure_tone(1024, 3.0, band_center(k, 10))};
    const auto e = band_energies(tone, 10);
    const auto oracle = dft_band_energies(tone.samples, 10);
    CHECK(e[k] >= 0.99 * energy(tone.samples));
    CHECK(oracle[k] >= 0.99 * energy(tone.samples));
  }

  // White noise: averaged over 100 seeds the bands are nearly equal.
  IQConfig cfg;
  std::vector<double> mean(10, 0.0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto e = band_energies(synth_step({}, 10, cfg, seed), 10);
    for (std::size_t k = 0; k < 10; ++k) mean[k] += e[k] / 100.0;
  }
  const auto [lo, hi] = std::minmax_element(mean.begin(), mean.end());
  CHECK(*hi / *lo < 1.5);
}

TEST_CASE("synth_step: noise power and determinism") {
  IQConfig cfg;
  double sum = 0.0;
  int within = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto frame = synth_step({}, 10, cfg, seed);
    REQUIRE(frame.samples.size() == 1024);
    const double p = energy(frame.samples) / 1024.0;
    sum += p;
    within += std::abs(p - cfg.noise_power) <= 0.1 * cfg.noise_power;
    for (auto s : frame.samples) REQUIRE(std::isfinite(s.real()));
  }
  CHECK(std::abs(sum / 200.0 - cfg.noise_power) <= 0.02);
  CHECK(within >= 198);

  const std::vector<Assignment> a{{"x", 3, Modulation::Ldapm}};
  CHECK(synth_step(a, 10, cfg, 9).samples == synth_step(a, 10, cfg, 9).samples);
  CHECK(synth_step(a, 10, cfg, 9).samples != synth_step(a, 10, cfg, 10).samples);
}

TEST_CASE("synth_step: tones land in their bands") {
  IQConfig cfg;
  const std::vector<Assignment> one{{"x", 2, Modulation::Tone}};
  const std::vector<Assignment> two{{"x", 2, Modulation::Tone}, {"y", 7, Modulation::Tone}};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto e = band_energies(synth_step(one, 10, cfg, seed), 10);
    for (std::size_t k = 0; k < 10; ++k) {
      if (k != 2) CHECK(e[2] > e[k]);
    }
    const auto occ = infer_occupancy(band_energies(synth_step(two, 10, cfg, seed), 10), cfg);
    CHECK(occupied_channels(occ) == std::vector<std::size_t>{2, 7});
  }
}

TEST_CASE("LDAPM: unit-power constellations, band containment, power tracking") {
  for (unsigned order : {2u, 4u, 8u, 16u}) {
    const auto pts = constellation(order);
    REQUIRE(pts.size() == order);
    double p = 0;
    for (auto s : pts) p += std::norm(s);
    CHECK(p / order == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS(constellation(3));

  for (unsigned order : {2u, 4u, 8u, 16u}) {
    IQConfig cfg;
    cfg.ldapm_order = order;
    double mean_band = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const std::vector<Assignment> a{{"x", 6, Modulation::Ldapm}};
      const auto e = band_energies(synth_step(a, 10, cfg, seed), 10);
      mean_band += e[6] / 100.0;
      CHECK(occupied_channels(infer_occupancy(e, cfg)) == std::vector<std::size_t>{6});
    }
    const double expected = cfg.signal_power * 1024.0;
    CHECK(std::abs(mean_band - expected) <= 0.1 * expected);
  }
}

TEST_CASE("infer_occupancy examples and threshold monotonicity") {
  IQConfig cfg;
  IQConfig quiet = cfg;
  quiet.noise_power = 1e-9;
  const std::vector<Assignment> a{{"x", 3, Modulation::Tone}};
  auto e = band_energies(synth_step(a, 10, quiet, 1), 10);
  CHECK(occupied_channels(infer_occupancy(e, cfg)) == std::vector<std::size_t>{3});
  CHECK(occupied_channels(infer_occupancy(std::vector<double>(10, 0.0), cfg)).empty());
  CHECK(noise_band_energy(cfg, 10) == doctest::Approx(102.4));

  // Raising the factor never adds channels.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::vector<Assignment> mix{{"x", 1, Modulation::Tone}, {"y", 8, Modulation::Ldapm}};
    IQConfig weak = cfg;
    weak.signal_power = 1.0;
    const auto energies = band_energies(synth_step(mix, 10, weak, seed), 10);
    std::vector<std::uint8_t> previous(10, 1);
    for (double factor : {1.01, 1.5, 2.0, 4.0, 8.0, 50.0, 500.0}) {
      IQConfig c = cfg;
      c.threshold_factor = factor;
      const auto occ = infer_occupancy(energies, c);
      for (std::size_t k = 0; k < 10; ++k) CHECK(occ[k] <= previous[k]);
      previous = occ;
    }
  }

  int false_alarms = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (auto o : infer_occupancy(band_energies(synth_step({}, 10, cfg, seed), 10), cfg)) false_alarms += o;
  }
  CHECK(false_alarms <= 0.05 * 200 * 10);
}

TEST_CASE("raw dump is interleaved little-endian float32 with a JSON sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "rfrl_iq_dump_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "frame.cf32";
  IQConfig cfg;
  cfg.samples_per_step = 64;
  const std::vector<Assignment> a{{"tx0", 4, Modulation::Tone}};
  const auto frame = synth_step(a, 8, cfg, 3);
  write_iq_dump(path, frame, cfg, 8, a, 3);
  CHECK(std::filesystem::file_size(path) == 64 * 8);

  const auto back = read_iq_samples(path);
  REQUIRE(back.samples.size() == 64);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(back.samples[i].real() == static_cast<float>(frame.samples[i].real()));
    CHECK(back.samples[i].imag() == static_cast<float>(frame.samples[i].imag()));
  }

  std::ifstream raw(path, std::ios::binary);
  unsigned char bytes[4];
  raw.read(reinterpret_cast<char*>(bytes), 4);
  const std::uint32_t bits = bytes[0] | bytes[1] << 8 | bytes[2] << 16 | static_cast<std::uint32_t>(bytes[3]) << 24;
  CHECK(std::bit_cast<float>(bits) == static_cast<float>(frame.samples[0].real()));

  std::ifstream side(dir / "frame.cf32.json");
  const auto meta = nlohmann::json::parse(side);
  CHECK(meta["format"] == "cf32_le");
  CHECK(meta["num_samples"] == 64);
  CHECK(meta["num_channels"] == 8);
  CHECK(meta["config"]["signal_power"] == 100.0);
  CHECK(meta["assignments"][0]["channel"] == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("IQ environment senses entities by energy and ignores its own signal") {
  auto spec = parse_scenario(R"({"environment": {"num_channels": 10, "episode_length": 3},
    "entities": [{"id": "e", "behavior": "hop", "start_channel": 3, "stride": 2}],
    "agents": [{"id": "a", "observation_mode": "detect", "reward_mode": "dsa"}]})");
  IqEnvironment env(spec, IQConfig{});
  auto obs = env.reset(5);
  CHECK(obs.cells == std::vector<LabelTable::Label>{0, 0, 0, 1, 0, 0, 0, 0, 0, 0});
  auto r = env.step(AgentAction::transmit(6));
  CHECK(r.reward == 1);
  CHECK(r.observation.cells[3] == 1);
  CHECK(r.observation.cells[6] == 0);
  r = env.step(AgentAction::transmit(5));  // hopper now on 5
  CHECK(r.reward == -1);
  CHECK(occupied_channels(r.occupancy) == std::vector<std::size_t>{5});
  r = env.step(AgentAction::idle());
  CHECK(r.done);

  auto two = parse_scenario(R"({"environment": {"num_channels": 4, "episode_length": 3},
    "agents": [{"id": "a", "observation_mode": "detect", "reward_mode": "dsa"},
               {"id": "b", "observation_mode": "detect", "reward_mode": "dsa"}]})");
  CHECK_THROWS_AS(IqEnvironment(two, IQConfig{}), EnvError);
}
