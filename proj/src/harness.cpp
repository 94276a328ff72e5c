#include "muonlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include "json.hpp"
#include "muonlab/csv.hpp"
#include "muonlab/errors.hpp"
#include "muonlab/parallel.hpp"

#ifndef MUONLAB_VERSION
#define MUONLAB_VERSION "dev"
#endif

namespace muonlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kSpectrumMin = 1e-3;
constexpr double kSpectrumMax = 10.0;
constexpr const char* kPrecisionNote =
    "float64 throughout; polar_express runs in float64 rather than bfloat16 and normalizes by the "
    "Frobenius norm; exact polar factor via scaled Newton iteration";

std::uint64_t seed_root(std::uint64_t base_seed, std::size_t seed_index) {
    return RandomStream(RandomStream::derive_seed(base_seed, seed_index)).next_u64();
}

bool is_exact_plain_muon(const OptimizerSpec& spec) {
    return spec.method == Method::Muon && spec.projection == ProjectionMode::ExactPolar &&
           spec.momentum == MomentumMode::None;
}

OptimizerSpec with_lr(const OptimizerSpec& base, double lr, const ExperimentConfig& config) {
    OptimizerSpec spec = base;
    if (base.method == Method::Muon && config.schedule == ScheduleMode::Cosine) {
        spec.schedule = ScheduleSpec::cosine(lr, std::min(lr, config.cosine_lr_final), config.T);
    } else if (base.schedule.kind == ScheduleSpec::Kind::Speedrun) {
        spec.schedule.lr = lr;
    } else {
        spec.schedule = ScheduleSpec::constant(lr);
    }
    return spec;
}

double min_up_to(const std::vector<double>& losses, int t) {
    const auto end = losses.begin() + std::min<std::ptrdiff_t>(t + 1, static_cast<std::ptrdiff_t>(losses.size()));
    return *std::min_element(losses.begin(), end);
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return empirical_quantile(values, 0.5);
}

void write_metadata(const fs::path& dir, const json& meta) {
    std::ofstream out(dir / "metadata.json", std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + (dir / "metadata.json").string());
    }
    out << meta.dump(2) << '\n';
    if (!out) {
        throw IoError("write failed for " + (dir / "metadata.json").string());
    }
}

json grid_metadata(const ExperimentConfig& c) {
    json kinds = json::array();
    for (SpectrumKind k : c.kinds) {
        kinds.push_back(std::string(to_string(k)));
    }
    json methods = json::array();
    for (const OptimizerSpec& m : c.methods) {
        json entry = m;
        entry["tag"] = m.tag();
        entry["schedule"].erase("lr");
        methods.push_back(entry);
    }
    return json{{"preset", c.preset},
                {"base_seed", c.base_seed},
                {"lr_grid", c.lr_grid},
                {"T", c.T},
                {"n", c.n},
                {"seeds", c.seeds},
                {"schedule", std::string(to_string(c.schedule))},
                {"cosine_lr_final", c.cosine_lr_final},
                {"milestones", c.milestones},
                {"milestone_mode", std::string(to_string(c.milestone_mode))},
                {"kinds", kinds},
                {"methods", methods},
                {"spectrum_endpoints", {kSpectrumMin, kSpectrumMax}},
                {"precision_note", kPrecisionNote},
                {"version", MUONLAB_VERSION}};
}

void write_winrates(const fs::path& path, const std::vector<WinRateRow>& rows) {
    CsvWriter w(path, {"kind", "milestone", "method_a", "method_b", "win_rate", "n_seeds"});
    for (const WinRateRow& r : rows) {
        w.cell(std::string(to_string(r.kind))).cell(r.milestone).cell(r.method_a).cell(r.method_b);
        w.cell(r.win_rate).cell(r.n_seeds);
        w.end_row();
    }
    w.close();
}

void write_ratios(const fs::path& path, const std::vector<RatioRow>& rows) {
    CsvWriter w(path, {"kind", "milestone", "mean", "half_width"});
    for (const RatioRow& r : rows) {
        w.cell(std::string(to_string(r.kind))).cell(r.milestone).cell(r.mean).cell(r.half_width);
        w.end_row();
    }
    w.close();
}

void write_bars(const fs::path& path, const std::vector<BarRow>& rows) {
    CsvWriter w(path, {"kind", "method", "initial_loss", "final_best_loss", "orders"});
    for (const BarRow& r : rows) {
        w.cell(std::string(to_string(r.kind))).cell(r.method).cell(r.initial_loss);
        w.cell(r.final_best_loss).cell(r.orders);
        w.end_row();
    }
    w.close();
}

void write_stationarity(const fs::path& path, const std::vector<StationarityRow>& rows) {
    CsvWriter w(path, {"kind", "method", "lr", "seed", "lhs", "rhs", "holds"});
    for (const StationarityRow& r : rows) {
        w.cell(std::string(to_string(r.kind))).cell(r.method).cell(r.lr).cell(r.seed);
        w.cell(r.lhs).cell(r.rhs).cell(r.holds ? 1 : 0);
        w.end_row();
    }
    w.close();
}

// runs.csv holds, per (kind, method, seed), the raw curve of the lr selected
// at the horizon.
void write_selected_runs(const fs::path& path, const GridResult& g) {
    CsvWriter w(path, {"kind", "method", "lr", "seed", "step", "loss"});
    const auto& c = g.config;
    for (std::size_t k = 0; k < c.kinds.size(); ++k) {
        for (std::size_t m = 0; m < c.methods.size(); ++m) {
            for (std::size_t s = 0; s < static_cast<std::size_t>(c.seeds); ++s) {
                const auto runs = g.runs_for(k, m, s);
                BestCurve best;
                try {
                    best = best_lr_curve(runs);
                } catch (const AllDiverged&) {
                    continue;
                }
                const TrajectoryRecord& rec = *runs[best.lr_index];
                for (std::size_t t = 0; t < rec.losses.size(); ++t) {
                    w.cell(std::string(to_string(c.kinds[k]))).cell(g.method_tags[m]).cell(best.lr);
                    w.cell(s).cell(t).cell(rec.losses[t]);
                    w.end_row();
                }
            }
        }
    }
    w.close();
}

std::vector<WinRateRow> all_winrates(const GridResult& g, const std::string& a, const std::string& b) {
    std::vector<WinRateRow> rows;
    for (SpectrumKind k : g.config.kinds) {
        for (int t : g.config.milestones) {
            rows.push_back(win_rate(g, a, b, k, t));
        }
    }
    return rows;
}

std::vector<RatioRow> all_ratios(const GridResult& g, const std::string& a, const std::string& b) {
    std::vector<RatioRow> rows;
    for (SpectrumKind k : g.config.kinds) {
        for (int t : g.config.milestones) {
            rows.push_back(ratio_stats(g, a, b, k, t));
        }
    }
    return rows;
}

std::string fmt_fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

} // namespace

std::string_view to_string(MilestoneMode m) { return m == MilestoneMode::PerT ? "per-t" : "horizon"; }
std::string_view to_string(ScheduleMode m) { return m == ScheduleMode::Constant ? "constant" : "cosine"; }

MilestoneMode parse_milestone_mode(std::string_view name) {
    if (name == "per-t") {
        return MilestoneMode::PerT;
    }
    if (name == "horizon") {
        return MilestoneMode::Horizon;
    }
    throw InvalidArgument("unknown milestone mode '" + std::string(name) + "' (expected per-t or horizon)");
}

ScheduleMode parse_schedule_mode(std::string_view name) {
    if (name == "constant") {
        return ScheduleMode::Constant;
    }
    if (name == "cosine") {
        return ScheduleMode::Cosine;
    }
    throw InvalidArgument("unknown schedule '" + std::string(name) + "' (expected constant or cosine)");
}

std::vector<int> ExperimentConfig::default_milestones(int T) { return {T / 10, T / 2, T}; }

void ExperimentConfig::validate() const {
    if (n < 2) {
        throw InvalidArgument("experiment: n must be at least 2");
    }
    if (T < 1) {
        throw InvalidArgument("experiment: T must be at least 1");
    }
    if (lr_grid.empty()) {
        throw InvalidArgument("experiment: lr grid is empty");
    }
    for (double lr : lr_grid) {
        if (!(lr > 0.0) || !std::isfinite(lr)) {
            throw InvalidArgument("experiment: learning rates must be positive");
        }
    }
    if (seeds < 1) {
        throw InvalidArgument("experiment: need at least one seed");
    }
    if (kinds.empty() || methods.empty()) {
        throw InvalidArgument("experiment: kinds and methods must be nonempty");
    }
    for (int t : milestones) {
        if (t < 1 || t > T) {
            throw InvalidArgument("experiment: milestone " + std::to_string(t) + " outside [1, T]");
        }
    }
}

const TrajectoryRecord& GridResult::at(std::size_t kind, std::size_t method, std::size_t lr,
                                       std::size_t seed) const {
    const std::size_t M = config.methods.size();
    const std::size_t L = config.lr_grid.size();
    const auto S = static_cast<std::size_t>(config.seeds);
    return records.at(((kind * M + method) * L + lr) * S + seed);
}

std::size_t GridResult::kind_index(SpectrumKind kind) const {
    const auto it = std::find(config.kinds.begin(), config.kinds.end(), kind);
    if (it == config.kinds.end()) {
        throw KeyMissing("spectrum kind '" + std::string(to_string(kind)) + "' not in grid");
    }
    return static_cast<std::size_t>(it - config.kinds.begin());
}

std::size_t GridResult::method_index(std::string_view tag) const {
    const auto it = std::find(method_tags.begin(), method_tags.end(), tag);
    if (it == method_tags.end()) {
        throw KeyMissing("method '" + std::string(tag) + "' not in grid");
    }
    return static_cast<std::size_t>(it - method_tags.begin());
}

std::vector<const TrajectoryRecord*> GridResult::runs_for(std::size_t kind, std::size_t method,
                                                          std::size_t seed) const {
    std::vector<const TrajectoryRecord*> out;
    for (std::size_t l = 0; l < config.lr_grid.size(); ++l) {
        out.push_back(&at(kind, method, l, seed));
    }
    return out;
}

std::uint64_t problem_seed(std::uint64_t base_seed, std::size_t seed_index, SpectrumKind kind) {
    return RandomStream::derive_seed(seed_root(base_seed, seed_index), 1 + static_cast<std::uint64_t>(kind));
}

std::uint64_t init_seed(std::uint64_t base_seed, std::size_t seed_index) {
    return RandomStream::derive_seed(seed_root(base_seed, seed_index), 0);
}

DenseMatrix initial_weights(std::size_t n, std::uint64_t seed) {
    RandomStream stream(seed);
    return normal_matrix(n, n, 1.0 / std::sqrt(static_cast<double>(n)), stream);
}

GridResult run_grid(const ExperimentConfig& config) {
    config.validate();
    GridResult g;
    g.config = config;
    for (const OptimizerSpec& m : config.methods) {
        m.validate();
        g.method_tags.push_back(m.tag());
    }
    const std::size_t K = config.kinds.size();
    const std::size_t M = config.methods.size();
    const std::size_t L = config.lr_grid.size();
    const auto S = static_cast<std::size_t>(config.seeds);
    g.records.resize(K * M * L * S);
    g.problems.resize(K * S);
    std::vector<std::vector<StationarityRow>> stationarity(K * S);
    std::atomic<std::size_t> done{0};

    parallel_for(K * S, config.threads, [&](std::size_t task) {
        const std::size_t k = task / S;
        const std::size_t s = task % S;
        ProblemDescriptor desc;
        desc.kind = config.kinds[k];
        desc.n = config.n;
        desc.s_min = kSpectrumMin;
        desc.s_max = kSpectrumMax;
        desc.seed = problem_seed(config.base_seed, s, desc.kind);
        const QuadraticProblem problem = desc.build();
        const DenseMatrix W0 = initial_weights(config.n, init_seed(config.base_seed, s));
        g.problems[k * S + s] = desc;

        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t l = 0; l < L; ++l) {
                const double lr = config.lr_grid[l];
                const OptimizerSpec spec = with_lr(config.methods[m], lr, config);
                DiagnosticsFlags flags;
                const bool check = config.check_stationarity && is_exact_plain_muon(spec) &&
                                   spec.schedule.kind == ScheduleSpec::Kind::Constant;
                flags.grad_nuclear = check;
                TrajectoryRecord rec = run_trajectory(problem, W0, spec, config.T, flags, s);
                if (check) {
                    const double d = static_cast<double>(std::min(problem.d_in(), problem.d_out()));
                    const StationarityCheck res = stationarity_bound_check(rec, problem.s_max(), d, lr);
                    stationarity[task].push_back(
                        {desc.kind, rec.method, lr, static_cast<int>(s), res.lhs, res.rhs, res.holds});
                    rec.grad_nuclear.clear();
                    rec.grad_nuclear.shrink_to_fit();
                }
                g.records[((k * M + m) * L + l) * S + s] = std::move(rec);
            }
        }
        const std::size_t finished = ++done;
        if (config.progress) {
            config.progress(finished, K * S);
        }
    });
    for (auto& rows : stationarity) {
        g.stationarity.insert(g.stationarity.end(), rows.begin(), rows.end());
    }
    return g;
}

std::vector<double> running_min(std::span<const double> losses) {
    std::vector<double> out(losses.begin(), losses.end());
    for (std::size_t i = 1; i < out.size(); ++i) {
        out[i] = std::min(out[i], out[i - 1]);
    }
    return out;
}

BestCurve best_lr_curve(std::span<const TrajectoryRecord* const> runs) {
    std::optional<std::size_t> best;
    double best_value = kInfinity;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i]->diverged || runs[i]->losses.empty()) {
            continue;
        }
        const double v = *std::min_element(runs[i]->losses.begin(), runs[i]->losses.end());
        if (!best || v < best_value) {
            best = i;
            best_value = v;
        }
    }
    if (!best) {
        throw AllDiverged("every learning rate diverged");
    }
    BestCurve out;
    out.lr_index = *best;
    out.lr = runs[*best]->lr;
    out.running_min = running_min(runs[*best]->losses);
    return out;
}

std::optional<double> best_loss_at(std::span<const TrajectoryRecord* const> runs, int t, MilestoneMode mode) {
    if (mode == MilestoneMode::Horizon) {
        try {
            const BestCurve best = best_lr_curve(runs);
            return best.running_min.at(static_cast<std::size_t>(t));
        } catch (const AllDiverged&) {
            return std::nullopt;
        }
    }
    std::optional<double> out;
    for (const TrajectoryRecord* r : runs) {
        if (r->diverged || r->losses.empty()) {
            continue;
        }
        const double v = min_up_to(r->losses, t);
        out = out ? std::min(*out, v) : v;
    }
    return out;
}

WinRateRow win_rate(const GridResult& grid, std::string_view method_a, std::string_view method_b,
                    SpectrumKind kind, int milestone, std::optional<MilestoneMode> mode, SeedRange seeds) {
    const std::size_t k = grid.kind_index(kind);
    const std::size_t a = grid.method_index(method_a);
    const std::size_t b = grid.method_index(method_b);
    const MilestoneMode sel = mode.value_or(grid.config.milestone_mode);
    const auto S = static_cast<std::size_t>(grid.config.seeds);
    const std::size_t end = seeds.end == 0 ? S : std::min(seeds.end, S);

    WinRateRow row;
    row.kind = kind;
    row.milestone = milestone;
    row.method_a = method_a;
    row.method_b = method_b;
    int wins = 0;
    for (std::size_t s = seeds.begin; s < end; ++s) {
        const auto la = best_loss_at(grid.runs_for(k, a, s), milestone, sel);
        const auto lb = best_loss_at(grid.runs_for(k, b, s), milestone, sel);
        if (!la || !lb) {
            ++row.dropped;
            continue;
        }
        ++row.n_seeds;
        wins += *la < *lb ? 1 : 0;
    }
    row.win_rate = row.n_seeds > 0 ? static_cast<double>(wins) / row.n_seeds : 0.0;
    return row;
}

RatioRow ratio_stats(const GridResult& grid, std::string_view method_a, std::string_view method_b,
                     SpectrumKind kind, int milestone, std::optional<MilestoneMode> mode) {
    const std::size_t k = grid.kind_index(kind);
    const std::size_t a = grid.method_index(method_a);
    const std::size_t b = grid.method_index(method_b);
    const MilestoneMode sel = mode.value_or(grid.config.milestone_mode);
    std::vector<double> ratios;
    for (std::size_t s = 0; s < static_cast<std::size_t>(grid.config.seeds); ++s) {
        const auto la = best_loss_at(grid.runs_for(k, a, s), milestone, sel);
        const auto lb = best_loss_at(grid.runs_for(k, b, s), milestone, sel);
        if (!la || !lb) {
            continue;
        }
        if (*la == 0.0) {
            ratios.push_back(*lb == 0.0 ? 1.0 : kInfinity);
        } else {
            ratios.push_back(*lb / *la);
        }
    }
    RatioRow row;
    row.kind = kind;
    row.milestone = milestone;
    row.method_a = method_a;
    row.method_b = method_b;
    row.n_seeds = static_cast<int>(ratios.size());
    if (ratios.empty()) {
        row.mean = std::numeric_limits<double>::quiet_NaN();
        row.half_width = std::numeric_limits<double>::quiet_NaN();
        return row;
    }
    const double n = static_cast<double>(ratios.size());
    row.mean = std::accumulate(ratios.begin(), ratios.end(), 0.0) / n;
    if (ratios.size() > 1) {
        double ss = 0.0;
        for (double r : ratios) {
            ss += (r - row.mean) * (r - row.mean);
        }
        row.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return row;
}

BarRow improvement_orders(const GridResult& grid, SpectrumKind kind, std::string_view method) {
    const std::size_t k = grid.kind_index(kind);
    const std::size_t m = grid.method_index(method);
    const bool clip = grid.config.methods[m].method == Method::GD && kind == SpectrumKind::MaxSpiked;
    BarRow row;
    row.kind = kind;
    row.method = method;
    int count = 0;
    double orders = 0.0;
    double initial = 0.0;
    double final_best = 0.0;
    for (std::size_t s = 0; s < static_cast<std::size_t>(grid.config.seeds); ++s) {
        const auto runs = grid.runs_for(k, m, s);
        BestCurve best;
        try {
            best = best_lr_curve(runs);
        } catch (const AllDiverged&) {
            continue;
        }
        const double l0 = runs.front()->losses.front();
        double lt = best.running_min.back();
        if (clip) {
            lt = std::max(lt, kGdMaxSpikedClip);
        }
        initial += l0;
        final_best += lt;
        orders += lt > 0.0 ? std::log10(l0 / lt) : kInfinity;
        ++count;
    }
    if (count > 0) {
        row.initial_loss = initial / count;
        row.final_best_loss = final_best / count;
        row.orders = orders / count;
    }
    return row;
}

LineSearchSummary run_linesearch_experiment(const LineSearchConfig& config) {
    if (config.seeds < 1) {
        throw InvalidArgument("line search experiment: need at least one seed");
    }
    LineSearchSummary out;
    out.instance_seed = seed_root(config.base_seed, std::numeric_limits<std::uint32_t>::max());
    RandomStream instance_stream(out.instance_seed);
    const QuadraticProblem problem = counterexample_instance(config.n, config.kappa, instance_stream);
    const auto S = static_cast<std::size_t>(config.seeds);

    out.gd.resize(S);
    out.greedy.resize(S);
    parallel_for(S, config.threads, [&](std::size_t s) {
        const DenseMatrix W0 = initial_weights(config.n, init_seed(config.base_seed, s));
        auto [gd, greedy] = run_linesearch_comparison(problem, W0, config.T, s);
        out.gd[s] = std::move(gd);
        out.greedy[s] = std::move(greedy);
    });

    std::size_t steps = 0;
    std::size_t stiefel = 0;
    std::size_t dominates = 0;
    std::vector<double> final_gd;
    std::vector<double> final_greedy;
    for (std::size_t s = 0; s < S; ++s) {
        for (const LineSearchStep& st : out.greedy[s].steps) {
            if (st.chosen == Direction::None) {
                continue;
            }
            ++steps;
            stiefel += st.chosen == Direction::Stiefel ? 1 : 0;
            dominates += st.delta_stiefel > st.delta_gd ? 1 : 0;
        }
        final_gd.push_back(out.gd[s].steps.back().gap);
        final_greedy.push_back(out.greedy[s].steps.back().gap);
    }
    out.stiefel_fraction = steps ? static_cast<double>(stiefel) / static_cast<double>(steps) : 0.0;
    out.stiefel_dominates_fraction = steps ? static_cast<double>(dominates) / static_cast<double>(steps) : 0.0;
    out.median_final_gap_gd = median_of(final_gd);
    out.median_final_gap_greedy = median_of(final_greedy);
    return out;
}

void write_hitting_csv(const fs::path& path, const std::vector<HittingTimeSummary>& rows) {
    CsvWriter w(path, {"sigma", "median", "q025", "q975", "frac_capped", "baseline", "n_samples", "seed"});
    for (const HittingTimeSummary& r : rows) {
        w.cell(r.sigma).cell(r.median).cell(r.q025).cell(r.q975).cell(r.frac_capped);
        w.cell(r.baseline).cell(r.n_samples).cell(r.seed);
        w.end_row();
    }
    w.close();
}

void write_linesearch_csv(const fs::path& path, const LineSearchSummary& summary) {
    CsvWriter w(path, {"policy", "seed", "step", "gap", "grad_norm", "dist", "chosen"});
    for (const auto* runs : {&summary.gd, &summary.greedy}) {
        for (const LineSearchRun& run : *runs) {
            for (const LineSearchStep& st : run.steps) {
                w.cell(run.policy).cell(run.seed).cell(st.step).cell(st.gap).cell(st.grad_norm);
                w.cell(st.dist).cell(std::string(to_string(st.chosen)));
                w.end_row();
            }
        }
    }
    w.close();
}

const std::vector<PresetInfo>& preset_registry() {
    static const std::vector<PresetInfo> registry = {
        {"table1_exact_vs_gd", "win rates and loss ratios, exact-projection Muon vs GD, constant lr",
         "winrates.csv, ratios.csv (GD over Muon), stationarity.csv"},
        {"table2_ns_vs_exact", "win rates and loss ratios, Polar Express Muon vs exact-projection Muon",
         "winrates.csv, ratios.csv (exact over Polar Express)"},
        {"fig2_bars", "orders of magnitude of loss decrease per family for GD, Adam, exact Muon",
         "bars.csv"},
        {"fig3_avg_trajectories", "loss curves at the selected lr for GD and exact Muon",
         "runs.csv"},
        {"fig4_median_hitting", "median hitting time of noisy sign dynamics over a sigma grid",
         "hitting.csv"},
        {"fig5_greedy", "exact line-search GD vs greedy GD/Stiefel policy on the spiked instance",
         "linesearch.csv with gap, gradient norm and distance per step"},
        {"appD_vanishing_lr", "GD (constant) vs Muon variants under a cosine schedule",
         "winrates.csv, bars.csv, runs.csv"},
        {"appD6_grad_conditioning", "condition numbers of GD gradients along trajectories",
         "gradcond.csv"},
        {"appF_sigma_sweep", "finer sigma sweep under both target conventions",
         "hitting.csv, hitting_loss_target.csv"},
    };
    return registry;
}

bool is_preset(std::string_view name) {
    const auto& reg = preset_registry();
    return std::any_of(reg.begin(), reg.end(), [&](const PresetInfo& p) { return p.name == name; });
}

ExperimentConfig preset_config(std::string_view name) {
    if (!is_preset(name)) {
        throw KeyMissing("unknown preset '" + std::string(name) + "'");
    }
    ExperimentConfig c;
    c.preset = name;
    c.milestones = ExperimentConfig::default_milestones(c.T);
    const ScheduleSpec cst = ScheduleSpec::constant(0.0);
    const OptimizerSpec gd = OptimizerSpec::gd(cst);
    const OptimizerSpec exact = OptimizerSpec::muon(ProjectionMode::ExactPolar, MomentumMode::None, cst);
    const OptimizerSpec pe = OptimizerSpec::muon(ProjectionMode::PolarExpress, MomentumMode::None, cst);
    if (name == "table1_exact_vs_gd") {
        c.methods = {gd, exact};
        c.check_stationarity = true;
    } else if (name == "table2_ns_vs_exact") {
        c.methods = {exact, pe};
    } else if (name == "fig2_bars") {
        c.methods = {gd, OptimizerSpec::adam_with(cst), exact};
    } else if (name == "fig3_avg_trajectories") {
        c.methods = {gd, exact};
    } else if (name == "appD_vanishing_lr") {
        c.schedule = ScheduleMode::Cosine;
        c.methods = {gd, exact,
                     OptimizerSpec::muon(ProjectionMode::ExactPolar, MomentumMode::NesterovPre, cst),
                     pe,
                     OptimizerSpec::muon(ProjectionMode::PolarExpress, MomentumMode::NesterovPre, cst)};
    } else if (name == "appD6_grad_conditioning") {
        c.methods = {gd};
        c.seeds = 10;
    } else {
        // Sign-dynamics and line-search presets do not use the grid fields.
        c.methods = {gd};
    }
    return c;
}

namespace {

ExperimentConfig apply_overrides(ExperimentConfig c, const PresetOverrides& o) {
    if (o.seed) {
        c.base_seed = *o.seed;
    }
    if (o.seeds) {
        c.seeds = *o.seeds;
    }
    if (o.T) {
        c.T = *o.T;
        c.milestones = ExperimentConfig::default_milestones(c.T);
        if (c.milestones.front() < 1) {
            c.milestones.erase(c.milestones.begin());
        }
    }
    if (o.lr_grid) {
        c.lr_grid = *o.lr_grid;
    }
    if (o.kinds) {
        c.kinds = *o.kinds;
    }
    if (o.schedule) {
        c.schedule = *o.schedule;
    }
    if (o.milestone_mode) {
        c.milestone_mode = *o.milestone_mode;
    }
    c.threads = o.threads;
    c.progress = o.progress;
    return c;
}

PresetOutcome run_sign_preset(std::string_view name, const fs::path& out, const PresetOverrides& o) {
    const std::uint64_t seed = o.seed.value_or(42);
    SignDynConfig cfg = reference_sign_config();
    if (o.seeds) {
        cfg.n_samples = *o.seeds;
    }
    if (o.T) {
        cfg.n_max = *o.T;
    }
    const bool fine = name == "appF_sigma_sweep";
    const std::vector<double> grid = reference_sigma_grid(fine ? 20 : 10);
    PresetOutcome outcome;
    const auto rows = sigma_sweep(cfg, grid, seed, o.threads);
    write_hitting_csv(out / "hitting.csv", rows);
    outcome.files.push_back("hitting.csv");
    if (fine) {
        SignDynConfig loss_cfg = cfg;
        loss_cfg.target = TargetConvention::Loss;
        write_hitting_csv(out / "hitting_loss_target.csv", sigma_sweep(loss_cfg, grid, seed, o.threads));
        outcome.files.push_back("hitting_loss_target.csv");
    }
    json meta{{"preset", std::string(name)},
              {"base_seed", seed},
              {"lr_grid", json::array()},
              {"T", cfg.n_max},
              {"n", 1},
              {"seeds", cfg.n_samples},
              {"schedule", "constant"},
              {"precision_note", "float64; xi drawn by the Marsaglia polar method"},
              {"alpha", cfg.alpha},
              {"eps", cfg.eps},
              {"s0", cfg.s0},
              {"target", std::string(to_string(cfg.target))},
              {"sigma_grid", grid},
              {"version", MUONLAB_VERSION}};
    if (fine) {
        meta["loss_target_half_width"] = loss_eps_to_half_width(cfg.eps);
    }
    write_metadata(out, meta);

    const auto lowest = std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.median < b.median;
    });
    outcome.summary = std::string(name) + ": " + std::to_string(rows.size()) + " sigma values; median at " +
                      format_double(rows.front().sigma) + " = " + fmt_fixed(rows.front().median, 1) +
                      ", at " + format_double(rows.back().sigma) + " = " + fmt_fixed(rows.back().median, 1) +
                      ", minimum " + fmt_fixed(lowest->median, 1) + " at sigma " + format_double(lowest->sigma) +
                      " (baseline " + std::to_string(rows.front().baseline) + ")";
    return outcome;
}

PresetOutcome run_linesearch_preset(const fs::path& out, const PresetOverrides& o) {
    LineSearchConfig cfg;
    cfg.base_seed = o.seed.value_or(42);
    if (o.seeds) {
        cfg.seeds = *o.seeds;
    }
    if (o.T) {
        cfg.T = *o.T;
    }
    cfg.threads = o.threads;
    const LineSearchSummary summary = run_linesearch_experiment(cfg);
    write_linesearch_csv(out / "linesearch.csv", summary);
    write_metadata(out, json{{"preset", "fig5_greedy"},
                             {"base_seed", cfg.base_seed},
                             {"lr_grid", json::array()},
                             {"T", cfg.T},
                             {"n", cfg.n},
                             {"seeds", cfg.seeds},
                             {"schedule", "exact_line_search"},
                             {"precision_note", kPrecisionNote},
                             {"kappa", cfg.kappa},
                             {"version", MUONLAB_VERSION}});
    PresetOutcome outcome;
    outcome.files = {"linesearch.csv"};
    outcome.summary = "fig5_greedy: greedy picked Stiefel on " + fmt_fixed(100.0 * summary.stiefel_fraction, 1) +
                      "% of steps; median final gap GD " + format_double(summary.median_final_gap_gd) +
                      " vs greedy " + format_double(summary.median_final_gap_greedy);
    return outcome;
}

PresetOutcome run_conditioning_preset(const ExperimentConfig& c, const fs::path& out) {
    const GridResult g = run_grid(c);
    CsvWriter w(out / "gradcond.csv", {"kind", "seed", "lr", "step", "condition"});
    for (std::size_t k = 0; k < c.kinds.size(); ++k) {
        std::vector<std::vector<double>> traces(static_cast<std::size_t>(c.seeds));
        std::vector<double> lrs(static_cast<std::size_t>(c.seeds), 0.0);
        parallel_for(static_cast<std::size_t>(c.seeds), c.threads, [&](std::size_t s) {
            BestCurve best;
            try {
                best = best_lr_curve(g.runs_for(k, 0, s));
            } catch (const AllDiverged&) {
                return;
            }
            const QuadraticProblem problem = g.problems[k * static_cast<std::size_t>(c.seeds) + s].build();
            const DenseMatrix W0 = initial_weights(c.n, init_seed(c.base_seed, s));
            DiagnosticsFlags flags;
            flags.grad_condition = true;
            const TrajectoryRecord rec = run_trajectory(problem, W0, OptimizerSpec::gd(ScheduleSpec::constant(best.lr)),
                                                        c.T, flags, s);
            traces[s] = rec.grad_condition;
            lrs[s] = best.lr;
        });
        for (std::size_t s = 0; s < traces.size(); ++s) {
            for (std::size_t t = 0; t < traces[s].size(); ++t) {
                w.cell(std::string(to_string(c.kinds[k]))).cell(s).cell(lrs[s]).cell(t).cell(traces[s][t]);
                w.end_row();
            }
        }
    }
    w.close();
    write_metadata(out, grid_metadata(c));
    PresetOutcome outcome;
    outcome.files = {"gradcond.csv"};
    outcome.summary = "appD6_grad_conditioning: " + std::to_string(w.rows()) + " condition-number rows";
    return outcome;
}

} // namespace

PresetOutcome run_preset(std::string_view name, const fs::path& out_dir, const PresetOverrides& overrides) {
    if (!is_preset(name)) {
        throw KeyMissing("unknown preset '" + std::string(name) + "'");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    if (name == "fig4_median_hitting" || name == "appF_sigma_sweep") {
        return run_sign_preset(name, out_dir, overrides);
    }
    if (name == "fig5_greedy") {
        return run_linesearch_preset(out_dir, overrides);
    }
    const ExperimentConfig c = apply_overrides(preset_config(name), overrides);
    if (name == "appD6_grad_conditioning") {
        return run_conditioning_preset(c, out_dir);
    }

    const GridResult g = run_grid(c);
    PresetOutcome outcome;
    json meta = grid_metadata(c);
    auto dropped_json = [&](const std::vector<WinRateRow>& rows) {
        json d = json::object();
        for (const WinRateRow& r : rows) {
            if (r.dropped > 0) {
                d[std::string(to_string(r.kind)) + "@" + std::to_string(r.milestone)] = r.dropped;
            }
        }
        return d;
    };

    if (name == "table1_exact_vs_gd" || name == "table2_ns_vs_exact") {
        const bool t1 = name == "table1_exact_vs_gd";
        const std::string a = t1 ? "muon_exact" : "muon_pe";
        const std::string b = t1 ? "gd" : "muon_exact";
        const auto wins = all_winrates(g, a, b);
        write_winrates(out_dir / "winrates.csv", wins);
        write_ratios(out_dir / "ratios.csv", all_ratios(g, a, b));
        outcome.files = {"winrates.csv", "ratios.csv"};
        meta["dropped_seeds"] = dropped_json(wins);
        meta["ratio_definition"] = "best loss of " + b + " divided by best loss of " + a;
        std::string pattern;
        for (std::size_t i = 0; i < wins.size(); ++i) {
            pattern += (i % c.milestones.size() == 0 ? (i ? " | " : "") : " ") + fmt_fixed(wins[i].win_rate, 2);
        }
        outcome.summary = std::string(name) + ": win rates " + pattern;
        if (t1) {
            write_stationarity(out_dir / "stationarity.csv", g.stationarity);
            outcome.files.push_back("stationarity.csv");
            const auto holds = std::count_if(g.stationarity.begin(), g.stationarity.end(),
                                             [](const StationarityRow& r) { return r.holds; });
            meta["stationarity_runs"] = g.stationarity.size();
            meta["stationarity_holds"] = holds;
            outcome.summary += "; stationarity bound holds on " + std::to_string(holds) + "/" +
                               std::to_string(g.stationarity.size()) + " runs";
        }
    } else if (name == "fig2_bars") {
        std::vector<BarRow> bars;
        for (SpectrumKind k : c.kinds) {
            for (const std::string& m : g.method_tags) {
                bars.push_back(improvement_orders(g, k, m));
            }
        }
        write_bars(out_dir / "bars.csv", bars);
        outcome.files = {"bars.csv"};
        outcome.summary = "fig2_bars: " + std::to_string(bars.size()) + " bars";
    } else if (name == "fig3_avg_trajectories") {
        write_selected_runs(out_dir / "runs.csv", g);
        outcome.files = {"runs.csv"};
        outcome.summary = "fig3_avg_trajectories: selected-lr curves for " + std::to_string(c.kinds.size()) +
                          " kinds x " + std::to_string(g.method_tags.size()) + " methods x " +
                          std::to_string(c.seeds) + " seeds";
    } else if (name == "appD_vanishing_lr") {
        std::vector<WinRateRow> wins;
        std::vector<BarRow> bars;
        for (std::size_t m = 1; m < g.method_tags.size(); ++m) {
            const auto rows = all_winrates(g, g.method_tags[m], "gd");
            wins.insert(wins.end(), rows.begin(), rows.end());
        }
        for (SpectrumKind k : c.kinds) {
            for (const std::string& m : g.method_tags) {
                bars.push_back(improvement_orders(g, k, m));
            }
        }
        write_winrates(out_dir / "winrates.csv", wins);
        write_bars(out_dir / "bars.csv", bars);
        write_selected_runs(out_dir / "runs.csv", g);
        meta["dropped_seeds"] = dropped_json(wins);
        outcome.files = {"winrates.csv", "bars.csv", "runs.csv"};
        outcome.summary = "appD_vanishing_lr: " + std::to_string(wins.size()) + " win-rate rows for " +
                          std::to_string(g.method_tags.size() - 1) + " Muon variants vs gd";
    }
    write_metadata(out_dir, meta);
    return outcome;
}

} // namespace muonlab
