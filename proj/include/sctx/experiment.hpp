#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sctx/scene.hpp"
#include "sctx/tasks.hpp"
#include "sctx/trajectory.hpp"

namespace sctx {

enum class Scenario { Single, Multi, Guided, Full, Baseline };

const char* to_string(Scenario scenario);
/// Throws InvalidArgument for unknown names.
Scenario parse_scenario(const std::string& name);
inline constexpr Scenario kAllScenarios[] = {Scenario::Single, Scenario::Multi, Scenario::Guided,
                                             Scenario::Full, Scenario::Baseline};

/// Raised for invalid experiment configs; the message lists every offending
/// field as "field: problem", one per line.
class ConfigError : public InvalidArgument {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct ExperimentConfig {
    std::string scene_path;  ///< empty: built-in default scene
    std::vector<Scenario> scenarios{std::begin(kAllScenarios), std::end(kAllScenarios)};
    int n_users = 3;
    double formation_radius = 1.5;
    /// Explicit anchors; when empty, `placement_count` are sampled from the seed.
    std::vector<Vec3d> placements;
    int placement_count = 12;
    /// Probe height above the floor for sampled anchors.
    double probe_height = 1.0;
    double placement_clearance = 0.8;
    int frame_count = 150;
    double frame_rate = 30.0;
    int full_rig_poses = 128;
    int map_width = 256;
    int camera_width = 160;
    int camera_height = 120;
    double camera_hfov_deg = 69.0;
    float voxel_size = kDefaultVoxelSize;
    std::uint64_t seed = 1;
    bool noise = false;
    double noise_sigma = 0.01;  ///< relative depth noise when `noise` is on
    Vec3f hole_color = kDefaultHoleColor;
    std::string out_dir = "out";
    bool write_images = true;

    /// Throws ConfigError naming every invalid field.
    void validate() const;

    CameraIntrinsics camera() const;
    EquirectGrid grid() const { return EquirectGrid(map_width); }

    /// INI with an [experiment] section; unknown keys are errors.
    static ExperimentConfig parse(std::istream& in);
    static ExperimentConfig load(const std::string& path);
    void write(std::ostream& out) const;
};

/// Anchor position plus the azimuth of the user formation around it.
struct Placement {
    Vec3d anchor = Vec3d::Zero();
    double formation_azimuth_deg = 0.0;
    std::uint64_t seed = 0;  ///< trajectory seed
};

/// Deterministic placements: anchors at probe height over floor points at
/// least `placement_clearance` from walls and obstacle footprints, each with
/// a formation azimuth that keeps every user's arm sweep in free space.
/// Explicit config placements only get a formation azimuth assigned.
std::vector<Placement> sample_placements(const SceneSpec& scene, const ExperimentConfig& config);

/// Per-frame metrics row; serialized as
/// placement,frame,timestamp,psnr_db,coverage,memory_bytes,scenario,seed.
struct MetricsRecord {
    int placement = 0;
    int frame = 0;
    double timestamp = 0.0;
    double psnr_db = 0.0;
    double coverage = 0.0;
    std::size_t memory_bytes = 0;
    Scenario scenario = Scenario::Single;
    std::uint64_t seed = 0;
};

inline constexpr const char* kMetricsHeader =
    "placement,frame,timestamp,psnr_db,coverage,memory_bytes,scenario,seed";

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRecord& r);
/// Throws InvalidArgument on a bad header or malformed row.
std::vector<MetricsRecord> read_metrics_csv(std::istream& in);

/// Final-frame outcome of one placement.
struct PlacementResult {
    std::vector<MetricsRecord> records;
    EnvMap estimate;
    ReprojectionStats reprojection;
    std::size_t observation_bytes = 0;
    std::size_t cloud_bytes = 0;
};

/// Trajectories of one scenario at one placement, in user order.
std::vector<Trajectory> scenario_trajectories(const SceneSpec& scene,
                                              const ExperimentConfig& config,
                                              const Placement& placement, Scenario scenario);

/// Renders, ingests and evaluates one scenario at one placement with a fresh
/// store. Multi-user sessions publish through the in-memory transport.
PlacementResult run_placement(const SceneSpec& scene, const ExperimentConfig& config,
                              const Placement& placement, int placement_index, Scenario scenario,
                              const EnvMap& truth);

struct ScenarioRun {
    Scenario scenario = Scenario::Single;
    std::vector<PlacementResult> placements;
    std::string csv_path;
    double seconds = 0.0;  ///< wall time of this scenario
};

struct ExperimentResult {
    std::vector<Placement> placements;
    std::vector<ScenarioRun> runs;
    double setup_seconds = 0.0;  ///< placement sampling and ground truth rendering
};

/// Runs every configured scenario over every placement sequentially and
/// writes <out>/<scenario>.csv, <out>/<scenario>_final.csv, trajectories
/// and, when enabled, PPM/PGM images under <out>/images.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct ScenarioSummary {
    Scenario scenario = Scenario::Single;
    std::map<int, MetricsRecord> finals;  ///< by placement
    double mean_psnr = 0.0;
    double mean_coverage = 0.0;
    double mean_memory = 0.0;
    std::size_t coverage_violations = 0;
};

struct AcceptanceFlag {
    std::string name;
    double value = 0.0;  ///< the quantity compared against the threshold
    std::string detail;
    bool pass = false;
};

struct PairwiseDelta {
    Scenario scenario = Scenario::Single;
    Scenario reference = Scenario::Single;
    double psnr_delta_db = 0.0;
    double psnr_relative = 0.0;  ///< delta / reference mean PSNR
    double memory_ratio = 0.0;   ///< scenario mean memory / reference mean memory
};

struct Report {
    std::vector<ScenarioSummary> scenarios;
    std::vector<PairwiseDelta> pairs;
    std::vector<AcceptanceFlag> flags;

    const ScenarioSummary* find(Scenario s) const;
    void write_text(std::ostream& out) const;
    void write_csv(std::ostream& out) const;
};

/// Summarizes metric CSVs (any number of files, any mix of scenarios). Needs
/// at least two scenarios; throws InvalidArgument when their placement/seed
/// sets differ. Flags cover the orderings checkable from final rows.
Report compare_report(const std::vector<std::string>& csv_paths);
Report compare_report(const std::vector<MetricsRecord>& records);

}  // namespace sctx
