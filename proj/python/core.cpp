#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstring>

#include "muonlab/errors.hpp"
#include "muonlab/harness.hpp"
#include "muonlab/line_search.hpp"
#include "muonlab/linalg.hpp"
#include "muonlab/optimizers.hpp"
#include "muonlab/sign_dynamics.hpp"
#include "muonlab/spectra.hpp"

namespace py = pybind11;
using namespace muonlab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseMatrix to_matrix(const Array& a) {
    if (a.ndim() != 2) {
        throw ShapeMismatch("expected a 2-d array");
    }
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return DenseMatrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const DenseMatrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

py::dict problem_dict(const QuadraticProblem& p) {
    py::dict d;
    d["A"] = to_array(p.A);
    d["B"] = to_array(p.B);
    d["W_star"] = to_array(p.W_star);
    d["eigenvalues"] = p.eigenvalues;
    if (!p.X.empty()) {
        d["X"] = to_array(p.X);
        d["Y"] = to_array(p.Y);
    }
    return d;
}

QuadraticProblem homogeneous(const Array& A, std::size_t d_out) {
    DenseMatrix m = to_matrix(A);
    const SvdResult r = svd(m);
    return make_homogeneous_problem(std::move(m), r.singular_values, d_out);
}

OptimizerSpec method_spec(const std::string& method, double lr, double mu, const std::string& momentum,
                          const std::string& projection) {
    const ScheduleSpec s = ScheduleSpec::constant(lr);
    switch (parse_method(method)) {
    case Method::GD:
        return OptimizerSpec::gd(s);
    case Method::Adam:
        return OptimizerSpec::adam_with(s);
    case Method::Muon:
        break;
    }
    return OptimizerSpec::muon(parse_projection(projection), parse_momentum(momentum), s, mu);
}

py::dict summary_dict(const HittingTimeSummary& s) {
    py::dict d;
    d["sigma"] = s.sigma;
    d["median"] = s.median;
    d["q025"] = s.q025;
    d["q975"] = s.q975;
    d["frac_capped"] = s.frac_capped;
    d["baseline"] = s.baseline;
    d["n_samples"] = s.n_samples;
    d["seed"] = s.seed;
    d["frac_above"] = s.frac_above;
    return d;
}

SignDynConfig sign_config(double alpha, double eps, double s0, int n_max, int n_samples,
                          const std::string& target) {
    SignDynConfig c;
    c.alpha = alpha;
    c.eps = eps;
    c.s0 = s0;
    c.n_max = n_max;
    c.n_samples = n_samples;
    if (target != "loss" && target != "interval") {
        throw InvalidArgument("target must be 'interval' or 'loss'");
    }
    c.target = target == "loss" ? TargetConvention::Loss : TargetConvention::Interval;
    c.validate();
    return c;
}

py::dict run_dict(const LineSearchRun& run) {
    py::dict d;
    d["policy"] = run.policy;
    d["seed"] = run.seed;
    std::vector<double> gap, grad, dist;
    std::vector<std::string> chosen;
    for (const LineSearchStep& s : run.steps) {
        gap.push_back(s.gap);
        grad.push_back(s.grad_norm);
        dist.push_back(s.dist);
        chosen.emplace_back(to_string(s.chosen));
    }
    d["gap"] = gap;
    d["grad_norm"] = grad;
    d["dist"] = dist;
    d["chosen"] = chosen;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Muon, GD and sign-dynamics experiments on controlled-spectrum quadratics";

    auto base = py::register_exception<Error>(m, "MuonlabError", PyExc_RuntimeError);
    py::register_exception<ShapeMismatch>(m, "ShapeMismatch", base);
    py::register_exception<NonFinite>(m, "NonFinite", base);
    py::register_exception<NonConvergence>(m, "NonConvergence", base);
    py::register_exception<UnknownKind>(m, "UnknownKind", base);
    py::register_exception<UnknownVariant>(m, "UnknownVariant", base);
    py::register_exception<DegenerateDirection>(m, "DegenerateDirection", base);
    py::register_exception<MissingDiagnostics>(m, "MissingDiagnostics", base);
    py::register_exception<AllDiverged>(m, "AllDiverged", base);
    py::register_exception<KeyMissing>(m, "KeyMissing", base);
    py::register_exception<IoError>(m, "IoError", base);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base);

    m.def(
        "svd",
        [](const Array& a) {
            const SvdResult r = svd(to_matrix(a));
            return py::make_tuple(to_array(r.U), r.singular_values, to_array(r.V));
        },
        py::arg("m"), "Thin SVD (U, s, V) with s non-increasing.");
    m.def("polar_factor", [](const Array& a) { return to_array(polar_factor(to_matrix(a))); }, py::arg("m"));
    m.def("polar_express", [](const Array& a) { return to_array(polar_express(to_matrix(a))); }, py::arg("g"));
    m.def("condition_number", [](const Array& a) { return condition_number(to_matrix(a)); }, py::arg("m"));

    m.def("spectrum_kinds", [] {
        std::vector<std::string> out;
        for (SpectrumKind k : kAllSpectrumKinds) {
            out.emplace_back(to_string(k));
        }
        return out;
    });
    m.def(
        "generate_spectrum",
        [](const std::string& kind, std::size_t n, std::uint64_t seed) {
            SpectrumSpec s;
            s.kind = parse_spectrum_kind(kind);
            s.n = n;
            RandomStream stream(seed);
            return generate_spectrum(s, stream);
        },
        py::arg("kind"), py::arg("n") = 100, py::arg("seed") = 0);
    m.def(
        "build_problem",
        [](const std::string& kind, std::size_t n, std::uint64_t seed) {
            ProblemDescriptor d;
            d.kind = parse_spectrum_kind(kind);
            d.n = n;
            d.seed = seed;
            return problem_dict(d.build());
        },
        py::arg("kind"), py::arg("n") = 100, py::arg("seed") = 0,
        "Problem arrays (A, B, W_star, X, Y, eigenvalues) for one spectrum family.");

    m.def(
        "run_trajectory",
        [](const std::string& kind, std::size_t n, std::uint64_t problem_seed, const Array& W0,
           const std::string& method, double lr, int T, const std::string& momentum, const std::string& projection,
           double mu) {
            ProblemDescriptor d;
            d.kind = parse_spectrum_kind(kind);
            d.n = n;
            d.seed = problem_seed;
            const QuadraticProblem p = d.build();
            const OptimizerSpec spec = method_spec(method, lr, mu, momentum, projection);
            const DenseMatrix w0 = to_matrix(W0);
            TrajectoryRecord r;
            {
                py::gil_scoped_release release;
                r = run_trajectory(p, w0, spec, T);
            }
            py::dict out;
            out["method"] = r.method;
            out["losses"] = r.losses;
            out["diverged"] = r.diverged;
            return out;
        },
        py::arg("kind"), py::arg("n"), py::arg("problem_seed"), py::arg("W0"), py::arg("method"), py::arg("lr"),
        py::arg("T"), py::arg("momentum") = "none", py::arg("projection") = "exact", py::arg("mu") = 0.95,
        "Loss trajectory of one optimizer on a generated problem.");
    m.def(
        "initial_weights",
        [](std::size_t n, std::uint64_t seed) { return to_array(initial_weights(n, seed)); },
        py::arg("n"), py::arg("seed"));

    m.def("step_1d", &step_1d, py::arg("s"), py::arg("alpha"), py::arg("sigma") = 0.0, py::arg("xi") = 0.0);
    m.def("reference_sigma_grid", &reference_sigma_grid, py::arg("per_decade") = 10);
    m.def(
        "monte_carlo_summary",
        [](double sigma, double alpha, double eps, double s0, int n_max, int n_samples, const std::string& target,
           std::uint64_t seed, int threads, int above) {
            SignDynConfig c = sign_config(alpha, eps, s0, n_max, n_samples, target);
            c.sigma = sigma;
            HittingTimeSummary s;
            {
                py::gil_scoped_release release;
                s = monte_carlo_summary(c, seed, threads, above);
            }
            return summary_dict(s);
        },
        py::arg("sigma"), py::arg("alpha") = 0.1, py::arg("eps") = 0.02, py::arg("s0") = 1.026,
        py::arg("n_max") = 1000, py::arg("n_samples") = 10000, py::arg("target") = "interval",
        py::arg("seed") = 42, py::arg("threads") = 1, py::arg("above") = 0);
    m.def(
        "sigma_sweep",
        [](const std::vector<double>& sigmas, double alpha, double eps, double s0, int n_max, int n_samples,
           const std::string& target, std::uint64_t seed, int threads) {
            const SignDynConfig c = sign_config(alpha, eps, s0, n_max, n_samples, target);
            std::vector<HittingTimeSummary> rows;
            {
                py::gil_scoped_release release;
                rows = sigma_sweep(c, sigmas, seed, threads);
            }
            py::list out;
            for (const auto& r : rows) {
                out.append(summary_dict(r));
            }
            return out;
        },
        py::arg("sigmas"), py::arg("alpha") = 0.1, py::arg("eps") = 0.02, py::arg("s0") = 1.026,
        py::arg("n_max") = 1000, py::arg("n_samples") = 10000, py::arg("target") = "interval",
        py::arg("seed") = 42, py::arg("threads") = 1);

    m.def(
        "exact_step_size",
        [](const Array& A, const Array& W, const Array& D) {
            const DenseMatrix w = to_matrix(W);
            return exact_step_size(homogeneous(A, w.cols()), w, to_matrix(D));
        },
        py::arg("A"), py::arg("W"), py::arg("D"), "Line-search step on 1/2 <W, A W> along -D (A symmetric PSD).");
    m.def(
        "greedy_step",
        [](const Array& A, const Array& W) {
            const DenseMatrix w = to_matrix(W);
            const GreedyStep g = greedy_step(homogeneous(A, w.cols()), w);
            py::dict d;
            d["W"] = to_array(g.W);
            d["chosen"] = std::string(to_string(g.chosen));
            d["delta_gd"] = g.delta_gd;
            d["delta_stiefel"] = g.delta_stiefel;
            d["alpha"] = g.alpha;
            return d;
        },
        py::arg("A"), py::arg("W"));
    m.def(
        "linesearch_experiment",
        [](std::size_t n, double kappa, int T, int seeds, std::uint64_t seed, int threads) {
            LineSearchConfig c;
            c.n = n;
            c.kappa = kappa;
            c.T = T;
            c.seeds = seeds;
            c.base_seed = seed;
            c.threads = threads;
            LineSearchSummary s;
            {
                py::gil_scoped_release release;
                s = run_linesearch_experiment(c);
            }
            py::dict d;
            d["stiefel_fraction"] = s.stiefel_fraction;
            d["stiefel_dominates_fraction"] = s.stiefel_dominates_fraction;
            d["median_final_gap_gd"] = s.median_final_gap_gd;
            d["median_final_gap_greedy"] = s.median_final_gap_greedy;
            py::list gd, greedy;
            for (const auto& r : s.gd) {
                gd.append(run_dict(r));
            }
            for (const auto& r : s.greedy) {
                greedy.append(run_dict(r));
            }
            d["gd"] = gd;
            d["greedy"] = greedy;
            return d;
        },
        py::arg("n") = 100, py::arg("kappa") = 1e3, py::arg("T") = 100, py::arg("seeds") = 100,
        py::arg("seed") = 42, py::arg("threads") = 1);

    m.def("list_presets", [] {
        std::vector<std::pair<std::string, std::string>> out;
        for (const PresetInfo& p : preset_registry()) {
            out.emplace_back(p.name, p.description);
        }
        return out;
    });
    m.def(
        "run_preset",
        [](const std::string& name, const std::filesystem::path& out, std::optional<std::uint64_t> seed,
           std::optional<int> seeds, std::optional<int> T, std::optional<std::vector<double>> lr_grid,
           std::optional<std::vector<std::string>> kinds, int threads) {
            PresetOverrides o;
            o.seed = seed;
            o.seeds = seeds;
            o.T = T;
            o.lr_grid = lr_grid;
            if (kinds) {
                std::vector<SpectrumKind> parsed;
                for (const auto& k : *kinds) {
                    parsed.push_back(parse_spectrum_kind(k));
                }
                o.kinds = parsed;
            }
            o.threads = threads;
            PresetOutcome res;
            {
                py::gil_scoped_release release;
                res = run_preset(name, out, o);
            }
            py::dict d;
            d["files"] = res.files;
            d["summary"] = res.summary;
            return d;
        },
        py::arg("name"), py::arg("out"), py::arg("seed") = py::none(), py::arg("seeds") = py::none(),
        py::arg("T") = py::none(), py::arg("lr_grid") = py::none(), py::arg("kinds") = py::none(),
        py::arg("threads") = 1, "Run a named preset and write its CSV and metadata files into `out`.");
}
