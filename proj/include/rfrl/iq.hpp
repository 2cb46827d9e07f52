#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rfrl/env.hpp"

namespace rfrl::iq {

enum class Modulation { Tone, Ldapm };

std::string_view to_string(Modulation m);
Modulation parse_modulation(std::string_view name);

struct IQConfig {
  std::size_t samples_per_step = 1024;
  double noise_power = 1.0;
  double signal_power = 100.0;  // 20 dB over noise_power
  Modulation modulation = Modulation::Tone;
  unsigned ldapm_order = 4;
  double threshold_factor = 4.0;

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

using Sample = std::complex<double>;

struct IQFrame {
  std::vector<Sample> samples;
};

struct Assignment {
  std::string occupant;
  std::size_t channel = 0;
  Modulation modulation = Modulation::Tone;
};

// Band layout: normalized frequency [-0.5, 0.5) split into num_channels
// equal contiguous bands, channel 0 lowest. DFT bins are assigned to the band
// containing their center frequency.
double band_center(std::size_t channel, std::size_t num_channels);
std::size_t band_of_bin(std::size_t bin, std::size_t num_bins, std::size_t num_channels);

/// Unit-average-power square/rectangular grid for order 2, 4, 8 or 16.
std::vector<Sample> constellation(unsigned order);

/// Noise plus one signal per assignment, deterministic in `seed`.
IQFrame synth_step(std::span<const Assignment> assignments, std::size_t num_channels, const IQConfig& config,
                   std::uint64_t seed);

/// Per-band energy; bands sum to the frame's sample energy.
std::vector<double> band_energies(const IQFrame& frame, std::size_t num_channels);

/// Expected band energy of noise alone: noise_power * samples_per_step / num_channels.
double noise_band_energy(const IQConfig& config, std::size_t num_channels);

/// 1 where energy > threshold_factor * noise_band_energy.
std::vector<std::uint8_t> infer_occupancy(std::span<const double> energies, const IQConfig& config);

/// In-place forward DFT (unnormalized) and inverse (scaled by 1/N).
void fft(std::vector<Sample>& data);
void ifft(std::vector<Sample>& data);

/// Raw dump: interleaved little-endian float32 I,Q pairs at `path`, with a
/// JSON sidecar at `path` + ".json" describing config and assignments.
void write_iq_dump(const std::filesystem::path& path, const IQFrame& frame, const IQConfig& config,
                   std::size_t num_channels, std::span<const Assignment> assignments, std::uint64_t seed);
IQFrame read_iq_samples(const std::filesystem::path& path);

struct IqStepResult {
  Observation observation;
  int reward = 0;
  bool done = false;
  OccupancyFrame frame;
  std::vector<double> energies;
  std::vector<std::uint8_t> occupancy;
};

/// Single-agent environment whose observations come from energy detection
/// on synthesized IQ rather than from the abstract occupancy frame. The
/// agent's own signal is left out of its sensing frame.
class IqEnvironment {
 public:
  IqEnvironment(ScenarioSpec spec, IQConfig config);

  Observation reset(std::uint64_t seed);
  IqStepResult step(AgentAction action);

  const Environment& core() const { return env_; }
  const IQConfig& config() const { return config_; }

 private:
  std::vector<std::uint8_t> sense(const OccupancyFrame& frame, std::uint64_t stream, std::vector<double>* energies) const;
  Observation observe() const;

  Environment env_;
  IQConfig config_;
  std::uint64_t seed_ = 0;
  std::deque<std::vector<std::uint8_t>> views_;
};

}  // namespace rfrl::iq
