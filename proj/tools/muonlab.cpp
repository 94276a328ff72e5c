// muonlab command-line driver: presets, sigma sweeps, line search, single runs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "muonlab/csv.hpp"
#include "muonlab/errors.hpp"
#include "muonlab/harness.hpp"
#include "muonlab/parallel.hpp"

namespace fs = std::filesystem;
using namespace muonlab;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::string preset;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> seeds;
    std::optional<int> T;
    std::string lr_grid;
    std::string kinds;
    std::string schedule;
    std::optional<int> threads;
    std::string milestone_mode;
    bool force = false;
    bool quiet = false;
    // single
    std::string kind = "uniform";
    std::string method = "muon_exact";
    double lr = 1e-2;
};

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::vector<double> parse_lr_grid(const std::string& text) {
    std::vector<double> out;
    for (const std::string& item : split_csv(text)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || !(v > 0.0)) {
            throw UsageError("--lr-grid: '" + item + "' is not a positive number");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw UsageError("--lr-grid: empty list");
    }
    return out;
}

std::vector<SpectrumKind> parse_kinds(const std::string& text) {
    std::vector<SpectrumKind> out;
    for (const std::string& item : split_csv(text)) {
        try {
            out.push_back(parse_spectrum_kind(item));
        } catch (const Error& e) {
            throw UsageError(std::string("--kinds: ") + e.what());
        }
    }
    if (out.empty()) {
        throw UsageError("--kinds: empty list");
    }
    return out;
}

// gd | adam | muon_{exact,pe}[_std|_nesterov|_post]
OptimizerSpec parse_method_tag(const std::string& tag, double lr) {
    const ScheduleSpec schedule = ScheduleSpec::constant(lr);
    if (tag == "gd") {
        return OptimizerSpec::gd(schedule);
    }
    if (tag == "adam") {
        return OptimizerSpec::adam_with(schedule);
    }
    for (ProjectionMode proj : {ProjectionMode::ExactPolar, ProjectionMode::PolarExpress}) {
        for (MomentumMode mom : {MomentumMode::None, MomentumMode::StandardPre, MomentumMode::NesterovPre,
                                 MomentumMode::PostProjection}) {
            const OptimizerSpec spec = OptimizerSpec::muon(proj, mom, schedule);
            if (spec.tag() == tag) {
                return spec;
            }
        }
    }
    throw UsageError("--method: unknown method '" + tag +
                     "' (expected gd, adam, muon_exact, muon_pe, optionally with _std, _nesterov or _post)");
}

void prepare_out(const Flags& f) {
    if (f.out.empty()) {
        throw UsageError("--out is required");
    }
    const fs::path out(f.out);
    std::error_code ec;
    if (fs::exists(out, ec)) {
        if (!fs::is_directory(out, ec)) {
            throw UsageError("--out: '" + f.out + "' exists and is not a directory");
        }
        if (!fs::is_empty(out, ec) && !f.force) {
            throw UsageError("--out: '" + f.out + "' is not empty (pass --force to overwrite)");
        }
    }
}

PresetOverrides overrides_from(const Flags& f) {
    PresetOverrides o;
    o.seed = f.seed;
    o.seeds = f.seeds;
    o.T = f.T;
    if (f.seeds && *f.seeds < 1) {
        throw UsageError("--seeds must be at least 1");
    }
    if (f.T && *f.T < 1) {
        throw UsageError("--T must be at least 1");
    }
    if (f.threads && *f.threads < 1) {
        throw UsageError("--threads must be at least 1");
    }
    if (!f.lr_grid.empty()) {
        o.lr_grid = parse_lr_grid(f.lr_grid);
    }
    if (!f.kinds.empty()) {
        o.kinds = parse_kinds(f.kinds);
    }
    try {
        if (!f.schedule.empty()) {
            o.schedule = parse_schedule_mode(f.schedule);
        }
        if (!f.milestone_mode.empty()) {
            o.milestone_mode = parse_milestone_mode(f.milestone_mode);
        }
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    o.threads = resolve_thread_count(f.threads);
    if (!f.quiet) {
        o.progress = [](std::size_t done, std::size_t total) {
            std::fprintf(stderr, "\r%zu/%zu", done, total);
            if (done == total) {
                std::fputc('\n', stderr);
            }
            std::fflush(stderr);
        };
    }
    return o;
}

int run_named(const std::string& preset, const Flags& f) {
    if (!is_preset(preset)) {
        throw UsageError("unknown preset '" + preset + "' (see list-presets)");
    }
    prepare_out(f);
    const PresetOverrides o = overrides_from(f);
    const PresetOutcome outcome = run_preset(preset, f.out, o);
    std::cout << outcome.summary << '\n';
    return kOk;
}

int list_presets() {
    for (const PresetInfo& p : preset_registry()) {
        std::cout << p.name << "\t" << p.description << "\t[" << p.outputs << "]\n";
    }
    return kOk;
}

int run_single(const Flags& f) {
    SpectrumKind kind{};
    try {
        kind = parse_spectrum_kind(f.kind);
    } catch (const Error& e) {
        throw UsageError(std::string("--kind: ") + e.what());
    }
    if (!(f.lr > 0.0)) {
        throw UsageError("--lr must be positive");
    }
    const OptimizerSpec spec = parse_method_tag(f.method, f.lr);
    const std::uint64_t base = f.seed.value_or(42);
    const int T = f.T.value_or(500);
    if (T < 1) {
        throw UsageError("--T must be at least 1");
    }
    if (!f.out.empty()) {
        prepare_out(f);
    }

    ProblemDescriptor desc;
    desc.kind = kind;
    desc.seed = problem_seed(base, 0, kind);
    const QuadraticProblem problem = desc.build();
    const DenseMatrix W0 = initial_weights(desc.n, init_seed(base, 0));
    const TrajectoryRecord rec = run_trajectory(problem, W0, spec, T, {}, 0);

    if (!f.out.empty()) {
        fs::create_directories(f.out);
        CsvWriter w(fs::path(f.out) / "runs.csv", {"kind", "method", "lr", "seed", "step", "loss"});
        for (std::size_t t = 0; t < rec.losses.size(); ++t) {
            w.cell(std::string(to_string(kind))).cell(rec.method).cell(f.lr).cell(0).cell(t).cell(rec.losses[t]);
            w.end_row();
        }
        w.close();
    }
    std::cout << "single: " << to_string(kind) << " " << rec.method << " lr=" << format_double(f.lr)
              << " L0=" << format_double(rec.losses.front()) << " L_T=" << format_double(rec.losses.back());
    if (rec.diverged) {
        std::cout << " (diverged at step " << rec.diverged_at << ")";
    }
    std::cout << '\n';
    return kOk;
}

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--seed", f.seed, "Base seed");
    cmd->add_option("--seeds", f.seeds, "Number of seeds (Monte Carlo samples for sweep-sigma)");
    cmd->add_option("--T", f.T, "Horizon (step cap for sweep-sigma)");
    cmd->add_option("--threads", f.threads, "Worker threads (default: MUONLAB_THREADS or all cores)");
    cmd->add_flag("--force", f.force, "Allow writing into a non-empty --out");
    cmd->add_flag("--quiet", f.quiet, "No progress counter");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"muonlab: Muon vs gradient descent on spectrum-controlled quadratics"};
    app.require_subcommand(1);
    Flags f;

    CLI::App* run = app.add_subcommand("run", "Run a named preset");
    run->add_option("--preset", f.preset, "Preset name (see list-presets)")->required();
    add_common(run, f);
    run->add_option("--lr-grid", f.lr_grid, "Comma-separated learning rates");
    run->add_option("--kinds", f.kinds, "Comma-separated spectrum kinds");
    run->add_option("--schedule", f.schedule, "Muon lr schedule: constant or cosine");
    run->add_option("--milestone-mode", f.milestone_mode, "per-t or horizon");

    CLI::App* sweep = app.add_subcommand("sweep-sigma", "Median hitting time over the reference sigma grid");
    add_common(sweep, f);

    CLI::App* ls = app.add_subcommand("linesearch", "Exact line-search GD vs greedy GD/Stiefel policy");
    add_common(ls, f);

    CLI::App* single = app.add_subcommand("single", "One trajectory on one problem, for debugging");
    add_common(single, f);
    single->add_option("--kind", f.kind, "Spectrum kind");
    single->add_option("--method", f.method, "gd, adam, muon_exact, muon_pe[_std|_nesterov|_post]");
    single->add_option("--lr", f.lr, "Learning rate");

    CLI::App* list = app.add_subcommand("list-presets", "List presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "muonlab: " << e.what() << '\n';
        return kUsageError;
    }

    try {
        if (list->parsed()) {
            return list_presets();
        }
        if (run->parsed()) {
            return run_named(f.preset, f);
        }
        if (sweep->parsed()) {
            return run_named("fig4_median_hitting", f);
        }
        if (ls->parsed()) {
            return run_named("fig5_greedy", f);
        }
        if (single->parsed()) {
            return run_single(f);
        }
    } catch (const UsageError& e) {
        std::cerr << "muonlab: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "muonlab: error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kUsageError;
}
