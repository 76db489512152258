#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geodesic_atlas/manifold.hpp"
#include "geodesic_atlas/sampling.hpp"
#include "geodesic_atlas/training.hpp"

namespace geodesic_atlas {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kArtifactFormat = 1;

/// Everything a command needs, resolved from preset, config file and flags
/// (in that order of precedence, later wins).
struct RunConfig {
  std::string preset = "desk";
  std::string manifold = "peaks";
  double scale = 1.0;
  std::optional<std::vector<double>> domain_lo;
  std::optional<std::vector<double>> domain_hi;
  std::optional<std::vector<double>> origin;  // domain centre when unset
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = ".";

  TrainConfig train;
  ChainConfig chains;

  std::string sampler = "curvature";  // curvature | uniform
  double mix_weight = 0.5;
  std::optional<std::vector<double>> bandwidth;  // Scott's rule when unset

  std::vector<std::vector<double>> describe_at;
  int curvature_grid = 0;  // describe: 0 skips the CSV
  int kde_grid = 64;
  int field_grid = 64;

  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::vector<double>> trace_from;
  double trace_step = 1e-2;
  int trace_max_steps = 10000;

  int symmetry_k = 3;
  int oracle_resolution = 128;

  /// Resolved configuration as written into every artifact header.
  nlohmann::ordered_json to_json() const;
};

/// Defaults for "desk" or "paper"; ConfigError otherwise.
RunConfig preset_config(const std::string& preset);

/// Overlays `doc` onto `cfg`. Unknown keys and ill-typed values raise ConfigError.
void apply_config(RunConfig& cfg, const nlohmann::json& doc);

/// Built-in manifold with any domain override applied.
ImmersedManifold resolve_manifold(const RunConfig& cfg);

/// cfg.origin, or the domain centre; ConfigError when outside the domain.
ChartPoint resolve_origin(const RunConfig& cfg, const ImmersedManifold& m);

/// Training distribution: curvature-weighted mixture (runs the MH chains) or uniform.
PointSampler make_training_sampler(const RunConfig& cfg, const ImmersedManifold& m);

/// `# ` comment lines naming the tool version, artifact, seed and config.
void write_artifact_header(std::ostream& os, const std::string& artifact, const RunConfig& cfg);

/// Entry point of the `geodesic-atlas` executable; args excludes argv[0].
/// Returns 0 on success, 1 on usage or configuration errors, 2 on runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geodesic_atlas
