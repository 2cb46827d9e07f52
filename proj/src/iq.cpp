#include "rfrl/iq.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "rfrl/rng.hpp"

namespace rfrl::iq {

std::string_view to_string(Modulation m) { return m == Modulation::Tone ? "tone" : "ldapm"; }

Modulation parse_modulation(std::string_view name) {
  if (name == "tone") return Modulation::Tone;
  if (name == "ldapm") return Modulation::Ldapm;
  throw std::invalid_argument("unknown modulation '" + std::string(name) + "'");
}

void IQConfig::validate() const {
  if (samples_per_step == 0) throw std::invalid_argument("samples_per_step must be positive");
  if (!(noise_power > 0) || !std::isfinite(noise_power)) throw std::invalid_argument("noise_power must be positive");
  if (!(signal_power > 0) || !std::isfinite(signal_power)) throw std::invalid_argument("signal_power must be positive");
  if (ldapm_order != 2 && ldapm_order != 4 && ldapm_order != 8 && ldapm_order != 16) {
    throw std::invalid_argument("ldapm_order must be 2, 4, 8 or 16");
  }
  if (!(threshold_factor > 1) || !std::isfinite(threshold_factor)) {
    throw std::invalid_argument("threshold_factor must exceed 1");
  }
}

double band_center(std::size_t channel, std::size_t num_channels) {
  return -0.5 + (static_cast<double>(channel) + 0.5) / static_cast<double>(num_channels);
}

std::size_t band_of_bin(std::size_t bin, std::size_t num_bins, std::size_t num_channels) {
  double f = static_cast<double>(bin) / static_cast<double>(num_bins);
  if (f >= 0.5) f -= 1.0;
  auto band = static_cast<std::size_t>(std::floor((f + 0.5) * static_cast<double>(num_channels)));
  return std::min(band, num_channels - 1);
}

std::vector<Sample> constellation(unsigned order) {
  // Columns x rows of the amplitude grid; odd integer levels centered on 0.
  unsigned cols = 0, rows = 0;
  switch (order) {
    case 2: cols = 2; rows = 1; break;
    case 4: cols = 2; rows = 2; break;
    case 8: cols = 4; rows = 2; break;
    case 16: cols = 4; rows = 4; break;
    default: throw std::invalid_argument("unsupported constellation order " + std::to_string(order));
  }
  std::vector<Sample> points;
  points.reserve(order);
  double power = 0.0;
  for (unsigned r = 0; r < rows; ++r) {
    for (unsigned c = 0; c < cols; ++c) {
      const double i = 2.0 * c - (cols - 1.0);
      const double q = rows == 1 ? 0.0 : 2.0 * r - (rows - 1.0);
      points.emplace_back(i, q);
      power += i * i + q * q;
    }
  }
  const double scale = 1.0 / std::sqrt(power / order);
  for (auto& p : points) p *= scale;
  return points;
}

namespace {

// FFTW planning is not thread-safe; execution on distinct arrays is.
class PlanCache {
 public:
  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto& plan = plans_[{n, sign}];
    if (!plan) {
      std::vector<Sample> scratch(n);
      auto* data = reinterpret_cast<fftw_complex*>(scratch.data());
      plan = fftw_plan_dft_1d(static_cast<int>(n), data, data, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
      if (!plan) throw std::runtime_error("fftw planning failed");
    }
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plans() {
  static PlanCache cache;
  return cache;
}

void transform(std::vector<Sample>& data, int sign) {
  if (data.empty()) return;
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plans().get(data.size(), sign), p, p);
}

void add_tone(std::vector<Sample>& out, std::size_t channel, std::size_t num_channels, double power, Rng& rng) {
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  const double phase = phase_dist(rng);
  const double amp = std::sqrt(power);
  const double w = 2.0 * std::numbers::pi * band_center(channel, num_channels);
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] += std::polar(amp, w * static_cast<double>(n) + phase);
  }
}

// Rectangular pulses at half the band width, mixed to band center, then
// confined to the band by zeroing out-of-band DFT bins.
void add_ldapm(std::vector<Sample>& out, std::size_t channel, std::size_t num_channels, double power, unsigned order,
               Rng& rng) {
  const auto points = constellation(order);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  const std::size_t samples_per_symbol = 2 * num_channels;
  const std::size_t n_total = out.size();
  const double w = 2.0 * std::numbers::pi * band_center(channel, num_channels);

  std::vector<Sample> sig(n_total);
  Sample symbol;
  for (std::size_t n = 0; n < n_total; ++n) {
    if (n % samples_per_symbol == 0) symbol = points[pick(rng)];
    sig[n] = symbol * std::polar(1.0, w * static_cast<double>(n));
  }
  fft(sig);
  for (std::size_t b = 0; b < n_total; ++b) {
    if (band_of_bin(b, n_total, num_channels) != channel) sig[b] = 0.0;
  }
  ifft(sig);

  double energy = 0.0;
  for (const auto& s : sig) energy += std::norm(s);
  if (energy <= 0.0) return;
  const double scale = std::sqrt(power * static_cast<double>(n_total) / energy);
  for (std::size_t n = 0; n < n_total; ++n) out[n] += sig[n] * scale;
}

}  // namespace

void fft(std::vector<Sample>& data) { transform(data, FFTW_FORWARD); }

void ifft(std::vector<Sample>& data) {
  transform(data, FFTW_BACKWARD);
  const double inv = 1.0 / static_cast<double>(data.size());
  for (auto& s : data) s *= inv;
}

IQFrame synth_step(std::span<const Assignment> assignments, std::size_t num_channels, const IQConfig& config,
                   std::uint64_t seed) {
  config.validate();
  if (num_channels == 0) throw std::invalid_argument("num_channels must be positive");
  for (const auto& a : assignments) {
    if (a.channel >= num_channels) {
      throw std::invalid_argument("assignment '" + a.occupant + "' on channel " + std::to_string(a.channel) +
                                  " outside [0, " + std::to_string(num_channels) + ")");
    }
  }

  Rng rng(seed);
  IQFrame frame;
  frame.samples.resize(config.samples_per_step);
  std::normal_distribution<double> noise(0.0, std::sqrt(config.noise_power / 2.0));
  for (auto& s : frame.samples) {
    const double re = noise(rng);
    const double im = noise(rng);
    s = {re, im};
  }
  for (const auto& a : assignments) {
    if (a.modulation == Modulation::Tone) {
      add_tone(frame.samples, a.channel, num_channels, config.signal_power, rng);
    } else {
      add_ldapm(frame.samples, a.channel, num_channels, config.signal_power, config.ldapm_order, rng);
    }
  }
  return frame;
}

std::vector<double> band_energies(const IQFrame& frame, std::size_t num_channels) {
  if (num_channels == 0) throw std::invalid_argument("num_channels must be positive");
  std::vector<double> energies(num_channels, 0.0);
  if (frame.samples.empty()) return energies;
  auto spectrum = frame.samples;
  fft(spectrum);
  const std::size_t n = spectrum.size();
  for (std::size_t b = 0; b < n; ++b) energies[band_of_bin(b, n, num_channels)] += std::norm(spectrum[b]);
  for (auto& e : energies) e /= static_cast<double>(n);
  return energies;
}

double noise_band_energy(const IQConfig& config, std::size_t num_channels) {
  return config.noise_power * static_cast<double>(config.samples_per_step) / static_cast<double>(num_channels);
}

std::vector<std::uint8_t> infer_occupancy(std::span<const double> energies, const IQConfig& config) {
  std::vector<std::uint8_t> occupied(energies.size(), 0);
  if (energies.empty()) return occupied;
  const double threshold = config.threshold_factor * noise_band_energy(config, energies.size());
  for (std::size_t k = 0; k < energies.size(); ++k) occupied[k] = energies[k] > threshold ? 1 : 0;
  return occupied;
}

void write_iq_dump(const std::filesystem::path& path, const IQFrame& frame, const IQConfig& config,
                   std::size_t num_channels, std::span<const Assignment> assignments, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  auto put = [&](float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 4);
  };
  for (const auto& s : frame.samples) {
    put(static_cast<float>(s.real()));
    put(static_cast<float>(s.imag()));
  }
  if (!out) throw std::runtime_error("short write to '" + path.string() + "'");

  nlohmann::json side = {
      {"format", "cf32_le"},
      {"num_samples", frame.samples.size()},
      {"num_channels", num_channels},
      {"seed", seed},
      {"config",
       {{"samples_per_step", config.samples_per_step},
        {"noise_power", config.noise_power},
        {"signal_power", config.signal_power},
        {"modulation", to_string(config.modulation)},
        {"ldapm_order", config.ldapm_order},
        {"threshold_factor", config.threshold_factor}}},
  };
  auto& list = side["assignments"] = nlohmann::json::array();
  for (const auto& a : assignments) {
    list.push_back({{"occupant", a.occupant}, {"channel", a.channel}, {"modulation", to_string(a.modulation)}});
  }
  auto sidecar = path;
  sidecar += ".json";
  std::ofstream meta(sidecar);
  if (!meta) throw std::runtime_error("cannot write '" + sidecar.string() + "'");
  meta << side.dump(2) << "\n";
}

IQFrame read_iq_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  auto get = [&](float& v) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    v = std::bit_cast<float>(bits);
    return true;
  };
  IQFrame frame;
  float re = 0, im = 0;
  while (get(re)) {
    if (!get(im)) throw std::runtime_error("truncated IQ file '" + path.string() + "'");
    frame.samples.emplace_back(re, im);
  }
  return frame;
}

IqEnvironment::IqEnvironment(ScenarioSpec spec, IQConfig config) : env_(std::move(spec)), config_(config) {
  config_.validate();
  if (env_.spec().agents.size() != 1) throw EnvError("the IQ environment takes exactly one agent");
  if (env_.spec().agents[0].observation_mode != ObservationMode::Detect) {
    throw EnvError("the IQ environment supports detect observations only");
  }
}

std::vector<std::uint8_t> IqEnvironment::sense(const OccupancyFrame& frame, std::uint64_t stream,
                                               std::vector<double>* energies) const {
  std::vector<Assignment> assignments;
  for (std::size_t ch = 0; ch < frame.num_channels(); ++ch) {
    for (const auto& o : frame.occupants[ch]) {
      if (o.kind == OccupantKind::Agent) continue;
      assignments.push_back({occupant_id(env_.spec(), o), ch, config_.modulation});
    }
  }
  const auto iq = synth_step(assignments, frame.num_channels(), config_, derive_seed(seed_, stream));
  auto e = band_energies(iq, frame.num_channels());
  auto occ = infer_occupancy(e, config_);
  if (energies) *energies = std::move(e);
  return occ;
}

Observation IqEnvironment::observe() const {
  const auto& agent = env_.spec().agents[0];
  Observation obs;
  obs.mode = ObservationMode::Detect;
  obs.num_channels = env_.spec().num_channels;
  obs.history_length = agent.history_length;
  obs.cells.assign(obs.num_channels * obs.history_length, 0);
  for (std::size_t age = 0; age < std::min(views_.size(), agent.history_length); ++age) {
    const auto& view = views_[views_.size() - 1 - age];
    std::copy(view.begin(), view.end(), obs.cells.begin() + static_cast<std::ptrdiff_t>(age * obs.num_channels));
  }
  return obs;
}

Observation IqEnvironment::reset(std::uint64_t seed) {
  seed_ = seed;
  env_.reset(seed);
  views_.clear();
  const std::vector<AgentAction> idle(1, AgentAction::idle());
  views_.push_back(sense(compose_frame(env_.spec(), 0, idle), 0, nullptr));
  return observe();
}

IqStepResult IqEnvironment::step(AgentAction action) {
  const std::vector<AgentAction> actions(1, action);
  auto core = env_.step(actions);
  IqStepResult result;
  result.reward = core.rewards[0];
  result.done = core.done;
  result.occupancy = sense(core.frame, core.frame.t + 1, &result.energies);
  result.frame = std::move(core.frame);
  views_.push_back(result.occupancy);
  while (views_.size() > env_.spec().agents[0].history_length) views_.pop_front();
  result.observation = observe();
  return result;
}

}  // namespace rfrl::iq
