#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "muonlab/linalg.hpp"
#include "muonlab/spectra.hpp"

namespace muonlab {

enum class Method { GD, Adam, Muon };
enum class ProjectionMode { ExactPolar, PolarExpress };
enum class MomentumMode { None, StandardPre, NesterovPre, PostProjection };

std::string_view to_string(Method m);
std::string_view to_string(ProjectionMode m);
std::string_view to_string(MomentumMode m);
Method parse_method(std::string_view name);
ProjectionMode parse_projection(std::string_view name);
MomentumMode parse_momentum(std::string_view name);

/// Polar Express quintic coefficients (a, b, c), one triple per iteration.
inline constexpr std::array<std::array<double, 3>, 5> kPolarExpressCoefficients = {{
    {8.156554524902461, -22.48329292557795, 15.878769915207462},
    {4.042929935166739, -2.808917465908714, 0.5000178451051316},
    {3.8916678022926607, -2.772484153217685, 0.5060648178503393},
    {3.285753657755655, -2.3681294933425376, 0.46449024233003106},
    {2.3465413258596377, -1.7097828382687081, 0.42323551169305323},
}};

/// Five quintic steps X <- aX + (bA + cA^2)X, A = X X^T, after scaling by
/// 1.02 ||X||_F + 1e-6. Tall inputs are processed transposed. Runs in double
/// precision. An all-zero input yields zeros.
DenseMatrix polar_express(const DenseMatrix& G);

/// Exact (Newton polar) or Polar Express direction; zero maps to zero.
DenseMatrix project(const DenseMatrix& G, ProjectionMode mode);

double speedrun_lr(double step, double S, double cooldown_frac = 0.55);
double speedrun_momentum(double step, double T, double warmup = 300.0, double cooldown = 50.0);

struct ScheduleSpec {
    enum class Kind { Constant, Cosine, Speedrun };
    Kind kind = Kind::Constant;
    double lr = 0.1;
    /// Cosine only.
    double lr_final = 1e-3;
    /// Cosine: annealing length T. Speedrun: S for the lr schedule.
    int horizon = 500;
    /// Speedrun momentum schedule: total steps, warmup, cooldown.
    int total_steps = 500;
    int warmup = 300;
    int cooldown = 50;

    static ScheduleSpec constant(double lr);
    static ScheduleSpec cosine(double lr0, double lr_final, int T);
    static ScheduleSpec speedrun(double lr0, int S, int T, int warmup = 300, int cooldown = 50);

    double lr_at(int step) const;
    void validate() const;
};

std::string_view to_string(ScheduleSpec::Kind k);

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerSpec {
    Method method = Method::Muon;
    ProjectionMode projection = ProjectionMode::ExactPolar;
    MomentumMode momentum = MomentumMode::None;
    /// Constant momentum; the speedrun schedule overrides it.
    double mu = 0.95;
    ScheduleSpec schedule;
    double weight_decay = 0.0;
    AdamParams adam;

    static OptimizerSpec gd(ScheduleSpec schedule);
    static OptimizerSpec adam_with(ScheduleSpec schedule);
    static OptimizerSpec muon(ProjectionMode projection, MomentumMode momentum, ScheduleSpec schedule,
                              double mu = 0.95);

    /// Short method label, e.g. "gd", "muon_exact", "muon_pe_nesterov".
    std::string tag() const;
    double momentum_at(int step) const;
    void validate() const;
};

void to_json(nlohmann::json& j, const ScheduleSpec& s);
void from_json(const nlohmann::json& j, ScheduleSpec& s);
void to_json(nlohmann::json& j, const OptimizerSpec& s);
void from_json(const nlohmann::json& j, OptimizerSpec& s);

struct OptimizerState {
    DenseMatrix W;
    /// Momentum buffer; also Adam's first moment.
    DenseMatrix v;
    /// Adam second moment.
    DenseMatrix m2;
    int step = 0;

    explicit OptimizerState(DenseMatrix W0);
};

/// One step in the order: momentum update, projection, W -= lr * s * u with
/// s = sqrt(max(1, rows / cols)), then W -= lr * wd * W.
void muon_step(OptimizerState& state, const DenseMatrix& grad, const OptimizerSpec& spec);
void gd_step(OptimizerState& state, const DenseMatrix& grad, const ScheduleSpec& schedule);
void adam_step(OptimizerState& state, const DenseMatrix& grad, const ScheduleSpec& schedule,
               const AdamParams& params = {});
/// Dispatch on spec.method.
void optimizer_step(OptimizerState& state, const DenseMatrix& grad, const OptimizerSpec& spec);

struct DiagnosticsFlags {
    bool grad_condition = false;
    bool grad_frobenius = false;
    bool grad_nuclear = false;
    bool distance = false;
};

/// Losses above this are treated as divergence.
inline constexpr double kDivergenceThreshold = 1e12;

struct TrajectoryRecord {
    std::string method;
    double lr = 0.0;
    std::uint64_t seed = 0;
    /// Length T + 1, losses[0] = L(W_0). After divergence the tail is +inf.
    std::vector<double> losses;
    bool diverged = false;
    /// First step whose loss was non-finite or above the threshold; -1 if none.
    int diverged_at = -1;
    /// Optional per-step diagnostics at W_t, same length as losses when logged.
    std::vector<double> grad_condition;
    std::vector<double> grad_frobenius;
    std::vector<double> grad_nuclear;
    std::vector<double> distance;

    int steps() const { return static_cast<int>(losses.size()) - 1; }
};

TrajectoryRecord run_trajectory(const QuadraticProblem& problem, const DenseMatrix& W0,
                                const OptimizerSpec& spec, int T, const DiagnosticsFlags& flags = {},
                                std::uint64_t seed = 0);

struct StationarityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// min_{0<=t<=T-1} ||grad L(W_t)||_* against (L0 - L*) / (T alpha) + Lips d alpha / 2.
/// Throws MissingDiagnostics if nuclear norms were not logged.
StationarityCheck stationarity_bound_check(const TrajectoryRecord& record, double lips, double d,
                                           double alpha, double loss_star = 0.0);

} // namespace muonlab
