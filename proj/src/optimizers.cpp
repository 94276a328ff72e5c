#include "muonlab/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "muonlab/errors.hpp"

namespace muonlab {

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<Method, 3> kMethodNames = {{
    {Method::GD, "gd"}, {Method::Adam, "adam"}, {Method::Muon, "muon"}}};
constexpr NameTable<ProjectionMode, 2> kProjectionNames = {{
    {ProjectionMode::ExactPolar, "exact"}, {ProjectionMode::PolarExpress, "polar_express"}}};
constexpr NameTable<MomentumMode, 4> kMomentumNames = {{
    {MomentumMode::None, "none"},
    {MomentumMode::StandardPre, "standard_pre"},
    {MomentumMode::NesterovPre, "nesterov_pre"},
    {MomentumMode::PostProjection, "post_projection"}}};
constexpr NameTable<ScheduleSpec::Kind, 3> kScheduleNames = {{
    {ScheduleSpec::Kind::Constant, "constant"},
    {ScheduleSpec::Kind::Cosine, "cosine"},
    {ScheduleSpec::Kind::Speedrun, "speedrun"}}};

template <typename E, std::size_t N>
std::string_view lookup_name(const NameTable<E, N>& table, E value) {
    for (const auto& [v, name] : table) {
        if (v == value) {
            return name;
        }
    }
    return "unknown";
}

template <typename E, std::size_t N>
E lookup_value(const NameTable<E, N>& table, std::string_view name, const char* what) {
    for (const auto& [v, n] : table) {
        if (n == name) {
            return v;
        }
    }
    throw UnknownVariant(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

void require_same_shape(const DenseMatrix& W, const DenseMatrix& g) {
    if (!W.same_shape(g)) {
        throw ShapeMismatch("gradient shape " + std::to_string(g.rows()) + "x" +
                            std::to_string(g.cols()) + " does not match W " +
                            std::to_string(W.rows()) + "x" + std::to_string(W.cols()));
    }
}

bool is_zero(const DenseMatrix& m) {
    return std::all_of(m.data().begin(), m.data().end(), [](double x) { return x == 0.0; });
}

// v <- mu v + (1 - mu) x
void blend(DenseMatrix& v, double mu, const DenseMatrix& x) {
    v *= mu;
    axpy(1.0 - mu, x, v);
}

// Muon step with an optional precomputed projection of the raw gradient.
void apply_muon(OptimizerState& state, const DenseMatrix& grad, const OptimizerSpec& spec,
                const DenseMatrix* projected_grad) {
    require_same_shape(state.W, grad);
    const double lr = spec.schedule.lr_at(state.step);
    const double mu = spec.momentum_at(state.step);
    auto project_grad = [&] { return projected_grad ? *projected_grad : project(grad, spec.projection); };

    DenseMatrix u;
    switch (spec.momentum) {
    case MomentumMode::None:
        u = project_grad();
        break;
    case MomentumMode::StandardPre:
        blend(state.v, mu, grad);
        u = project(state.v, spec.projection);
        break;
    case MomentumMode::NesterovPre: {
        blend(state.v, mu, grad);
        DenseMatrix m = state.v;
        blend(m, mu, grad);
        u = project(m, spec.projection);
        break;
    }
    case MomentumMode::PostProjection:
        blend(state.v, mu, project_grad());
        u = state.v;
        break;
    }
    const double rows = static_cast<double>(state.W.rows());
    const double cols = static_cast<double>(state.W.cols());
    const double s = std::sqrt(std::max(1.0, rows / cols));
    axpy(-lr * s, u, state.W);
    if (spec.weight_decay != 0.0) {
        state.W *= 1.0 - lr * spec.weight_decay;
    }
    ++state.step;
}

} // namespace

std::string_view to_string(Method m) { return lookup_name(kMethodNames, m); }
std::string_view to_string(ProjectionMode m) { return lookup_name(kProjectionNames, m); }
std::string_view to_string(MomentumMode m) { return lookup_name(kMomentumNames, m); }
std::string_view to_string(ScheduleSpec::Kind k) { return lookup_name(kScheduleNames, k); }
Method parse_method(std::string_view name) { return lookup_value(kMethodNames, name, "method"); }
ProjectionMode parse_projection(std::string_view name) {
    return lookup_value(kProjectionNames, name, "projection");
}
MomentumMode parse_momentum(std::string_view name) {
    return lookup_value(kMomentumNames, name, "momentum mode");
}

DenseMatrix polar_express(const DenseMatrix& G) {
    if (!G.all_finite()) {
        throw NonFinite("polar_express: input contains NaN or Inf");
    }
    const bool tall = G.rows() > G.cols();
    DenseMatrix X = tall ? G.transpose() : G;
    X *= 1.0 / (1.02 * frobenius_norm(X) + 1e-6);
    for (const auto& [a, b, c] : kPolarExpressCoefficients) {
        const DenseMatrix A = matmul_nt(X, X);
        DenseMatrix B = matmul(A, A);
        B *= c;
        axpy(b, A, B);
        DenseMatrix next = matmul(B, X);
        axpy(a, X, next);
        X = std::move(next);
    }
    return tall ? X.transpose() : X;
}

DenseMatrix project(const DenseMatrix& G, ProjectionMode mode) {
    if (is_zero(G)) {
        return DenseMatrix::zeros_like(G);
    }
    return mode == ProjectionMode::ExactPolar ? polar_factor_newton(G) : polar_express(G);
}

double speedrun_lr(double step, double S, double cooldown_frac) {
    const double x = step / S;
    const double cooldown_weight = std::max(0.0, std::min(1.0, (1.0 - x) / cooldown_frac));
    const double lr_min = 0.1;
    const double lr_max = 1.0 + 0.52 * (x > 1.0 / 3.0 ? 1.0 : 0.0) + 0.21 * (x > 2.0 / 3.0 ? 1.0 : 0.0);
    return lr_min + cooldown_weight * (lr_max - lr_min);
}

double speedrun_momentum(double step, double T, double warmup, double cooldown) {
    const double warmup_frac = std::max(0.0, std::min(1.0, step / warmup));
    const double cooldown_frac = std::max(0.0, std::min(1.0, (T - cooldown - step) / cooldown));
    const double momentum_min = 0.85;
    const double momentum_max = 0.95;
    return momentum_min + std::min(warmup_frac, cooldown_frac) * (momentum_max - momentum_min);
}

ScheduleSpec ScheduleSpec::constant(double lr) {
    ScheduleSpec s;
    s.lr = lr;
    return s;
}

ScheduleSpec ScheduleSpec::cosine(double lr0, double lr_final, int T) {
    ScheduleSpec s;
    s.kind = Kind::Cosine;
    s.lr = lr0;
    s.lr_final = lr_final;
    s.horizon = T;
    return s;
}

ScheduleSpec ScheduleSpec::speedrun(double lr0, int S, int T, int warmup, int cooldown) {
    ScheduleSpec s;
    s.kind = Kind::Speedrun;
    s.lr = lr0;
    s.horizon = S;
    s.total_steps = T;
    s.warmup = warmup;
    s.cooldown = cooldown;
    return s;
}

double ScheduleSpec::lr_at(int step) const {
    switch (kind) {
    case Kind::Constant:
        return lr;
    case Kind::Cosine: {
        const double t = std::min(step, horizon);
        return lr_final +
               (lr - lr_final) * 0.5 * (1.0 + std::cos(std::numbers::pi * t / static_cast<double>(horizon)));
    }
    case Kind::Speedrun:
        return lr * speedrun_lr(step, horizon);
    }
    return lr;
}

void ScheduleSpec::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw InvalidArgument("schedule: lr must be finite and non-negative");
    }
    if (kind == Kind::Cosine && (!(lr_final >= 0.0) || lr_final > lr || horizon < 1)) {
        throw InvalidArgument("cosine schedule: need 0 <= lr_final <= lr0 and T >= 1");
    }
    if (kind == Kind::Speedrun && (horizon < 1 || warmup < 1 || cooldown < 1)) {
        throw InvalidArgument("speedrun schedule: S, warmup and cooldown must be positive");
    }
}

OptimizerSpec OptimizerSpec::gd(ScheduleSpec schedule) {
    OptimizerSpec s;
    s.method = Method::GD;
    s.schedule = schedule;
    return s;
}

OptimizerSpec OptimizerSpec::adam_with(ScheduleSpec schedule) {
    OptimizerSpec s;
    s.method = Method::Adam;
    s.schedule = schedule;
    return s;
}

OptimizerSpec OptimizerSpec::muon(ProjectionMode projection, MomentumMode momentum,
                                  ScheduleSpec schedule, double mu) {
    OptimizerSpec s;
    s.method = Method::Muon;
    s.projection = projection;
    s.momentum = momentum;
    s.schedule = schedule;
    s.mu = mu;
    return s;
}

std::string OptimizerSpec::tag() const {
    if (method != Method::Muon) {
        return std::string(to_string(method));
    }
    std::string out = projection == ProjectionMode::ExactPolar ? "muon_exact" : "muon_pe";
    switch (momentum) {
    case MomentumMode::None:
        break;
    case MomentumMode::StandardPre:
        out += "_std";
        break;
    case MomentumMode::NesterovPre:
        out += "_nesterov";
        break;
    case MomentumMode::PostProjection:
        out += "_post";
        break;
    }
    return out;
}

double OptimizerSpec::momentum_at(int step) const {
    if (schedule.kind == ScheduleSpec::Kind::Speedrun) {
        return speedrun_momentum(step, schedule.total_steps, schedule.warmup, schedule.cooldown);
    }
    return mu;
}

void OptimizerSpec::validate() const {
    schedule.validate();
    if (!(mu >= 0.0 && mu < 1.0)) {
        throw InvalidArgument("momentum mu must lie in [0, 1)");
    }
    if (!(weight_decay >= 0.0)) {
        throw InvalidArgument("weight_decay must be non-negative");
    }
}

void to_json(nlohmann::json& j, const ScheduleSpec& s) {
    j = nlohmann::json{{"kind", std::string(to_string(s.kind))}, {"lr", s.lr}};
    if (s.kind == ScheduleSpec::Kind::Cosine) {
        j["lr_final"] = s.lr_final;
        j["T"] = s.horizon;
    } else if (s.kind == ScheduleSpec::Kind::Speedrun) {
        j["S"] = s.horizon;
        j["T"] = s.total_steps;
        j["warmup"] = s.warmup;
        j["cooldown"] = s.cooldown;
    }
}

void from_json(const nlohmann::json& j, ScheduleSpec& s) {
    s = ScheduleSpec{};
    s.kind = lookup_value(kScheduleNames, j.at("kind").get<std::string>(), "schedule");
    s.lr = j.at("lr").get<double>();
    if (s.kind == ScheduleSpec::Kind::Cosine) {
        s.lr_final = j.at("lr_final").get<double>();
        s.horizon = j.at("T").get<int>();
    } else if (s.kind == ScheduleSpec::Kind::Speedrun) {
        s.horizon = j.at("S").get<int>();
        s.total_steps = j.at("T").get<int>();
        s.warmup = j.value("warmup", 300);
        s.cooldown = j.value("cooldown", 50);
    }
}

void to_json(nlohmann::json& j, const OptimizerSpec& s) {
    j = nlohmann::json{{"method", std::string(to_string(s.method))}, {"schedule", s.schedule}};
    if (s.method == Method::Muon) {
        j["projection"] = std::string(to_string(s.projection));
        j["momentum"] = std::string(to_string(s.momentum));
        j["mu"] = s.mu;
        j["weight_decay"] = s.weight_decay;
    }
    if (s.method == Method::Adam) {
        j["beta1"] = s.adam.beta1;
        j["beta2"] = s.adam.beta2;
        j["eps"] = s.adam.eps;
    }
}

void from_json(const nlohmann::json& j, OptimizerSpec& s) {
    s = OptimizerSpec{};
    s.method = parse_method(j.at("method").get<std::string>());
    s.schedule = j.at("schedule").get<ScheduleSpec>();
    s.projection = parse_projection(j.value("projection", std::string("exact")));
    s.momentum = parse_momentum(j.value("momentum", std::string("none")));
    s.mu = j.value("mu", 0.95);
    s.weight_decay = j.value("weight_decay", 0.0);
    s.adam.beta1 = j.value("beta1", 0.9);
    s.adam.beta2 = j.value("beta2", 0.999);
    s.adam.eps = j.value("eps", 1e-8);
    s.validate();
}

OptimizerState::OptimizerState(DenseMatrix W0)
    : W(std::move(W0)), v(DenseMatrix::zeros_like(W)), m2(DenseMatrix::zeros_like(W)) {}

void muon_step(OptimizerState& state, const DenseMatrix& grad, const OptimizerSpec& spec) {
    apply_muon(state, grad, spec, nullptr);
}

void gd_step(OptimizerState& state, const DenseMatrix& grad, const ScheduleSpec& schedule) {
    require_same_shape(state.W, grad);
    axpy(-schedule.lr_at(state.step), grad, state.W);
    ++state.step;
}

void adam_step(OptimizerState& state, const DenseMatrix& grad, const ScheduleSpec& schedule,
               const AdamParams& params) {
    require_same_shape(state.W, grad);
    const double lr = schedule.lr_at(state.step);
    const int t = state.step + 1;
    const double c1 = 1.0 - std::pow(params.beta1, t);
    const double c2 = 1.0 - std::pow(params.beta2, t);
    auto g = grad.data();
    auto m = state.v.data();
    auto v = state.m2.data();
    auto w = state.W.data();
    for (std::size_t k = 0; k < g.size(); ++k) {
        m[k] = params.beta1 * m[k] + (1.0 - params.beta1) * g[k];
        v[k] = params.beta2 * v[k] + (1.0 - params.beta2) * g[k] * g[k];
        w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + params.eps);
    }
    ++state.step;
}

void optimizer_step(OptimizerState& state, const DenseMatrix& grad, const OptimizerSpec& spec) {
    switch (spec.method) {
    case Method::GD:
        gd_step(state, grad, spec.schedule);
        break;
    case Method::Adam:
        adam_step(state, grad, spec.schedule, spec.adam);
        break;
    case Method::Muon:
        muon_step(state, grad, spec);
        break;
    }
}

TrajectoryRecord run_trajectory(const QuadraticProblem& problem, const DenseMatrix& W0,
                                const OptimizerSpec& spec, int T, const DiagnosticsFlags& flags,
                                std::uint64_t seed) {
    if (T < 0) {
        throw InvalidArgument("run_trajectory: T must be non-negative");
    }
    spec.validate();
    TrajectoryRecord rec;
    rec.method = spec.tag();
    rec.lr = spec.schedule.lr;
    rec.seed = seed;
    rec.losses.reserve(static_cast<std::size_t>(T) + 1);

    // The exact polar factor of the raw gradient gives ||G||_* = <P(G), G>
    // and is reused for the step when the method projects the raw gradient.
    const bool reuse_polar = spec.method == Method::Muon &&
                             spec.projection == ProjectionMode::ExactPolar &&
                             (spec.momentum == MomentumMode::None ||
                              spec.momentum == MomentumMode::PostProjection);

    OptimizerState state(W0);
    for (int t = 0; t <= T; ++t) {
        LossAndGradient eval = evaluate(problem, state.W);
        if (!std::isfinite(eval.loss) || eval.loss > kDivergenceThreshold || !eval.grad.all_finite()) {
            rec.diverged = true;
            rec.diverged_at = t;
            break;
        }
        rec.losses.push_back(eval.loss);

        DenseMatrix polar;
        if (flags.grad_nuclear || (reuse_polar && t < T)) {
            polar = project(eval.grad, ProjectionMode::ExactPolar);
        }
        if (flags.grad_nuclear) {
            rec.grad_nuclear.push_back(frobenius_inner(polar, eval.grad));
        }
        if (flags.grad_frobenius) {
            rec.grad_frobenius.push_back(frobenius_norm(eval.grad));
        }
        if (flags.grad_condition) {
            rec.grad_condition.push_back(is_zero(eval.grad) ? kInfinity : condition_number(eval.grad));
        }
        if (flags.distance) {
            rec.distance.push_back(frobenius_norm(state.W - problem.W_star));
        }
        if (t == T) {
            break;
        }
        if (spec.method == Method::Muon) {
            apply_muon(state, eval.grad, spec, reuse_polar ? &polar : nullptr);
        } else {
            optimizer_step(state, eval.grad, spec);
        }
    }
    if (rec.diverged) {
        rec.losses.resize(static_cast<std::size_t>(T) + 1, kInfinity);
        for (auto* diag : {&rec.grad_condition, &rec.grad_frobenius, &rec.grad_nuclear, &rec.distance}) {
            if (!diag->empty()) {
                diag->resize(static_cast<std::size_t>(T) + 1, kInfinity);
            }
        }
    }
    return rec;
}

StationarityCheck stationarity_bound_check(const TrajectoryRecord& record, double lips, double d,
                                           double alpha, double loss_star) {
    const int T = record.steps();
    if (T < 1) {
        throw InvalidArgument("stationarity check needs at least one step");
    }
    if (record.grad_nuclear.size() < static_cast<std::size_t>(T)) {
        throw MissingDiagnostics("stationarity check needs per-step gradient nuclear norms");
    }
    if (!(alpha > 0.0)) {
        throw InvalidArgument("stationarity check needs alpha > 0");
    }
    StationarityCheck out;
    out.lhs = *std::min_element(record.grad_nuclear.begin(), record.grad_nuclear.begin() + T);
    out.rhs = (record.losses.front() - loss_star) / (static_cast<double>(T) * alpha) +
              0.5 * lips * d * alpha;
    out.holds = out.lhs <= out.rhs;
    return out;
}

} // namespace muonlab
