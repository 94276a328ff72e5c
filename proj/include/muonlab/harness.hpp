#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "muonlab/line_search.hpp"
#include "muonlab/optimizers.hpp"
#include "muonlab/sign_dynamics.hpp"
#include "muonlab/spectra.hpp"

namespace muonlab {

/// How the learning rate is chosen when reporting milestone t.
///  PerT:    per milestone, the lr with the smallest running-min loss up to t.
///  Horizon: one lr per (method, seed), chosen at t = T, read off at every t.
enum class MilestoneMode { PerT, Horizon };
enum class ScheduleMode { Constant, Cosine };

std::string_view to_string(MilestoneMode m);
std::string_view to_string(ScheduleMode m);
MilestoneMode parse_milestone_mode(std::string_view name);
ScheduleMode parse_schedule_mode(std::string_view name);

struct ExperimentConfig {
    std::string preset;
    std::size_t n = 100;
    int T = 500;
    std::vector<double> lr_grid = {1e-1, 1e-2, 1e-3};
    int seeds = 100;
    std::uint64_t base_seed = 42;
    std::vector<SpectrumKind> kinds{kAllSpectrumKinds.begin(), kAllSpectrumKinds.end()};
    /// Methods with schedule.lr ignored; each grid lr is substituted in turn.
    std::vector<OptimizerSpec> methods;
    std::vector<int> milestones;
    /// Applied to Muon methods. GD and Adam always use constant rates.
    ScheduleMode schedule = ScheduleMode::Constant;
    /// Final lr of the cosine schedule.
    double cosine_lr_final = 1e-3;
    MilestoneMode milestone_mode = MilestoneMode::PerT;
    int threads = 1;
    /// Log nuclear norms on exact no-momentum Muon runs and check the
    /// stationarity inequality.
    bool check_stationarity = false;
    /// Called after each finished (kind, seed) task with (done, total).
    std::function<void(std::size_t, std::size_t)> progress;

    /// {T/10, T/2, T} with integer division.
    static std::vector<int> default_milestones(int T);
    void validate() const;
};

/// Per-run stationarity inequality outcome.
struct StationarityRow {
    SpectrumKind kind = SpectrumKind::Uniform;
    std::string method;
    double lr = 0.0;
    int seed = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// All trajectories of a (kind x method x lr x seed) grid.
struct GridResult {
    ExperimentConfig config;
    std::vector<std::string> method_tags;
    /// Indexed by [kind][method][lr][seed], flattened.
    std::vector<TrajectoryRecord> records;
    /// Indexed by [kind][seed].
    std::vector<ProblemDescriptor> problems;
    std::vector<StationarityRow> stationarity;

    const TrajectoryRecord& at(std::size_t kind, std::size_t method, std::size_t lr, std::size_t seed) const;
    std::size_t kind_index(SpectrumKind kind) const;
    std::size_t method_index(std::string_view tag) const;
    /// Pointers to the runs of one (kind, method, seed) across the lr grid.
    std::vector<const TrajectoryRecord*> runs_for(std::size_t kind, std::size_t method, std::size_t seed) const;
};

/// Seed index s derives a root seed from base_seed; W_0 comes from the root,
/// the problem of kind k from a sub-seed of it. Methods and lrs therefore see
/// identical (problem, W_0) pairs.
std::uint64_t problem_seed(std::uint64_t base_seed, std::size_t seed_index, SpectrumKind kind);
std::uint64_t init_seed(std::uint64_t base_seed, std::size_t seed_index);
DenseMatrix initial_weights(std::size_t n, std::uint64_t seed);

GridResult run_grid(const ExperimentConfig& config);

/// Running minimum, non-increasing.
std::vector<double> running_min(std::span<const double> losses);

struct BestCurve {
    std::size_t lr_index = 0;
    double lr = 0.0;
    std::vector<double> running_min;
};

/// Picks the lr whose run has the smallest min-loss up to its last step,
/// skipping diverged runs. Throws AllDiverged if nothing is left.
BestCurve best_lr_curve(std::span<const TrajectoryRecord* const> runs);

/// Best running-min loss up to t under the given selection mode; nullopt if
/// every lr diverged.
std::optional<double> best_loss_at(std::span<const TrajectoryRecord* const> runs, int t, MilestoneMode mode);

struct SeedRange {
    std::size_t begin = 0;
    /// Exclusive; 0 means "all seeds".
    std::size_t end = 0;
};

struct WinRateRow {
    SpectrumKind kind = SpectrumKind::Uniform;
    int milestone = 0;
    std::string method_a;
    std::string method_b;
    double win_rate = 0.0;
    int n_seeds = 0;
    int dropped = 0;
};

struct RatioRow {
    SpectrumKind kind = SpectrumKind::Uniform;
    int milestone = 0;
    std::string method_a;
    std::string method_b;
    /// Mean of best_B / best_A over seeds.
    double mean = 0.0;
    double half_width = 0.0;
    int n_seeds = 0;
};

/// Fraction of seeds where A's best loss up to t is strictly below B's.
/// Throws KeyMissing for an unknown method or kind.
WinRateRow win_rate(const GridResult& grid, std::string_view method_a, std::string_view method_b,
                    SpectrumKind kind, int milestone, std::optional<MilestoneMode> mode = std::nullopt,
                    SeedRange seeds = {});

RatioRow ratio_stats(const GridResult& grid, std::string_view method_a, std::string_view method_b,
                     SpectrumKind kind, int milestone, std::optional<MilestoneMode> mode = std::nullopt);

struct BarRow {
    SpectrumKind kind = SpectrumKind::Uniform;
    std::string method;
    double initial_loss = 0.0;
    double final_best_loss = 0.0;
    double orders = 0.0;
};

/// GD on max_spiked is stopped at this loss when summarizing.
inline constexpr double kGdMaxSpikedClip = 1e-5;

/// Mean over seeds of log10(L_0 / best loss up to T), lr selected at T.
BarRow improvement_orders(const GridResult& grid, SpectrumKind kind, std::string_view method);

struct LineSearchConfig {
    std::size_t n = 100;
    double kappa = 1e3;
    int T = 100;
    int seeds = 100;
    std::uint64_t base_seed = 42;
    int threads = 1;
};

struct LineSearchSummary {
    std::vector<LineSearchRun> gd;
    std::vector<LineSearchRun> greedy;
    std::uint64_t instance_seed = 0;
    double stiefel_fraction = 0.0;
    /// Greedy steps with delta_stiefel > delta_gd, as a fraction of all greedy steps.
    double stiefel_dominates_fraction = 0.0;
    double median_final_gap_gd = 0.0;
    double median_final_gap_greedy = 0.0;
};

/// One instance (from base_seed) and `seeds` initializations W_0 ~ N(0, 1/n).
LineSearchSummary run_linesearch_experiment(const LineSearchConfig& config);

struct PresetInfo {
    std::string name;
    std::string description;
    std::string outputs;
};

const std::vector<PresetInfo>& preset_registry();
bool is_preset(std::string_view name);

/// Preset defaults before any overrides.
ExperimentConfig preset_config(std::string_view name);

/// Overrides accepted on top of a preset.
struct PresetOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> seeds;
    std::optional<int> T;
    std::optional<std::vector<double>> lr_grid;
    std::optional<std::vector<SpectrumKind>> kinds;
    std::optional<ScheduleMode> schedule;
    std::optional<MilestoneMode> milestone_mode;
    int threads = 1;
    std::function<void(std::size_t, std::size_t)> progress;
};

struct PresetOutcome {
    std::vector<std::string> files;
    /// One-line human summary.
    std::string summary;
};

/// Runs a preset and writes its CSVs and metadata.json into out_dir (created
/// if needed). Throws IoError on write failures.
PresetOutcome run_preset(std::string_view name, const std::filesystem::path& out_dir,
                         const PresetOverrides& overrides = {});

/// Writers shared by presets and the Python bindings.
void write_hitting_csv(const std::filesystem::path& path, const std::vector<HittingTimeSummary>& rows);
void write_linesearch_csv(const std::filesystem::path& path, const LineSearchSummary& summary);

} // namespace muonlab
