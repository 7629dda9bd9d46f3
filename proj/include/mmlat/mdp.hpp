#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mmlat/config.hpp"
#include "mmlat/errors.hpp"
#include "mmlat/gain_distribution.hpp"
#include "mmlat/parallel.hpp"
#include "mmlat/phy.hpp"
#include "mmlat/queue.hpp"

namespace mmlat::mdp {

struct SolverParams {
    double alpha = 0.999;      // discount factor approximating the average-cost problem
    double tol = 1e-9;         // relative value-iteration tolerance
    double delta = 1e-3;       // bisection stop: beta_min / beta_max >= 1 - delta
    double z = 1e6;            // upper end of the Lagrange-multiplier bracket
    double power_tol = 0.01;   // feasibility audit slack on the power constraint
    long max_iterations = 1000000;

    void validate() const {
        if (!(alpha > 0.0) || alpha >= 1.0) throw ConfigError("alpha must be in (0, 1)");
        if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
        if (!(delta > 0.0) || delta >= 0.1) throw ConfigError("delta must be in (0, 0.1)");
        if (!(z > 0.0)) throw ConfigError("z must be > 0");
        if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    }
};

/// Precomputed one-step data for a fixed target error rate: expected latency
/// cost, per-rate power, and the two successor states per (q, r).
class StageModel {
  public:
    StageModel(double eps, const SystemConfig& cfg, const GainDistribution& dist)
        : eps_(eps), states_(cfg.buffer_size + 1) {
        const double lambda = cfg.arrival_rate;
        const double drop_penalty = cfg.drop_penalty_frames();
        power_.resize(states_);
        const double quantile_eps = queue::power_eps(eps, dist);
        for (int r = 0; r < states_; ++r)
            power_[r] = phy::required_power(r, quantile_eps, cfg, dist);
        cost_.assign(static_cast<std::size_t>(states_) * states_, 0.0);
        succ_.assign(static_cast<std::size_t>(states_) * states_, 0);
        fail_.assign(static_cast<std::size_t>(states_) * states_, 0);
        for (int q = 0; q < states_; ++q) {
            for (int r = 0; r <= q; ++r) {
                const queue::StepResult s = queue::step(q, r, true, cfg);
                const queue::StepResult f = queue::step(q, r, false, cfg);
                const double expected_drop = (1.0 - eps) * s.dropped + eps * f.dropped;
                cost_[at(q, r)] = q / lambda + expected_drop / lambda * drop_penalty;
                succ_[at(q, r)] = s.next_queue;
                fail_[at(q, r)] = f.next_queue;
            }
        }
    }

    double eps() const { return eps_; }
    int states() const { return states_; }
    const std::optional<double>& power(int r) const { return power_[r]; }
    double cost(int q, int r) const { return cost_[at(q, r)]; }
    int next_success(int q, int r) const { return succ_[at(q, r)]; }
    int next_fail(int q, int r) const { return fail_[at(q, r)]; }

  private:
    std::size_t at(int q, int r) const {
        return static_cast<std::size_t>(q) * states_ + r;
    }

    double eps_;
    int states_;
    std::vector<std::optional<double>> power_;
    std::vector<double> cost_;
    std::vector<int> succ_;
    std::vector<int> fail_;
};

/// One synchronous Bellman sweep. For each queue length the minimization runs
/// over integer rates 0..q; infeasible rates carry infinite cost and ties
/// break toward the smaller rate.
inline std::pair<std::vector<double>, std::vector<int>>
bellman_update(const std::vector<double>& v, const StageModel& model, double beta,
               double alpha) {
    const int n = model.states();
    std::vector<double> v_next(static_cast<std::size_t>(n));
    std::vector<int> rate_map(static_cast<std::size_t>(n));
    const double eps = model.eps();
    for (int q = 0; q < n; ++q) {
        double best = std::numeric_limits<double>::infinity();
        int best_r = -1;
        for (int r = 0; r <= q; ++r) {
            const std::optional<double>& p = model.power(r);
            if (!p) continue;
            const double value =
                model.cost(q, r) + beta * *p +
                alpha * ((1.0 - eps) * v[model.next_success(q, r)] +
                         eps * v[model.next_fail(q, r)]);
            if (value < best) {
                best = value;
                best_r = r;
            }
        }
        if (best_r < 0) {
            std::ostringstream msg;
            msg << "no feasible transmission rate at q=" << q << " eps=" << eps;
            throw InfeasibleError(msg.str());
        }
        v_next[q] = best;
        rate_map[q] = best_r;
    }
    return {std::move(v_next), std::move(rate_map)};
}

struct ValueIterationResult {
    std::vector<double> value;
    std::vector<int> rate_map;
    long iterations = 0;
    double residual = 0.0;
};

/// Discounted value iteration to the standard stopping rule
/// sup|V_{k+1} - V_k| < tol (1 - alpha) / alpha, relative to the value scale.
/// Returns the greedy policy of the final value function.
inline ValueIterationResult value_iteration(const StageModel& model, double beta,
                                            const SolverParams& params,
                                            std::vector<double> v0 = {}) {
    params.validate();
    const int n = model.states();
    std::vector<double> v = v0.empty() ? std::vector<double>(n, 0.0) : std::move(v0);
    if (static_cast<int>(v.size()) != n)
        throw ConfigError("initial value function has wrong size");
    ValueIterationResult out;
    for (long it = 0; it < params.max_iterations; ++it) {
        auto [v_next, rate_map] = bellman_update(v, model, beta, params.alpha);
        double change = 0.0;
        double scale = 1.0;
        for (int q = 0; q < n; ++q) {
            change = std::max(change, std::abs(v_next[q] - v[q]));
            scale = std::max(scale, std::abs(v_next[q]));
        }
        v = std::move(v_next);
        out.iterations = it + 1;
        out.residual = change;
        if (change < params.tol * (1.0 - params.alpha) / params.alpha * scale) {
            out.value = std::move(v);
            out.rate_map = std::move(rate_map);
            return out;
        }
    }
    throw ConvergenceError("value iteration exceeded the iteration cap");
}

struct BetaProbe {
    double beta = 0.0;
    double avg_power = 0.0;
    double latency = 0.0;
};

struct BisectResult {
    bool feasible = false;
    double beta = 0.0;
    queue::Policy policy;
    double latency = 0.0;
    double avg_power = 0.0;
    std::vector<BetaProbe> probes; // audit trail; avg_power non-increasing in beta
};

/// Binary search for the smallest Lagrange multiplier whose greedy policy
/// meets the average power budget. Each probe runs value iteration and then
/// evaluates the extracted policy exactly on the induced chain, so the
/// search is deterministic. Returns the feasible endpoint.
inline BisectResult bisect_beta(double eps, const SystemConfig& cfg,
                                const GainDistribution& dist, const SolverParams& params) {
    cfg.validate();
    params.validate();
    const StageModel model(eps, cfg, dist);
    const double budget = cfg.power_budget;

    BisectResult out;
    std::vector<double> warm;
    const auto probe = [&](double beta) {
        ValueIterationResult vi = value_iteration(model, beta, params, warm);
        warm = vi.value;
        queue::Policy policy{eps, vi.rate_map};
        const queue::SteadyState eval = queue::steady_state_eval(policy, cfg, dist);
        out.probes.push_back({beta, eval.avg_power, eval.latency_frames});
        return std::make_pair(std::move(policy), eval);
    };

    // Unconstrained first: if beta = 0 already fits the budget it is optimal.
    auto [policy0, eval0] = probe(0.0);
    if (eval0.avg_power <= budget) {
        out.feasible = true;
        out.beta = 0.0;
        out.policy = std::move(policy0);
        out.latency = eval0.latency_frames;
        out.avg_power = eval0.avg_power;
        return out;
    }

    auto [policy_hi, eval_hi] = probe(params.z);
    if (eval_hi.avg_power > budget) {
        out.feasible = false;
        out.beta = params.z;
        out.policy = std::move(policy_hi);
        out.latency = eval_hi.latency_frames;
        out.avg_power = eval_hi.avg_power;
        return out;
    }

    double beta_min = 0.0; // infeasible side
    double beta_max = params.z; // feasible side
    queue::Policy best_policy = std::move(policy_hi);
    queue::SteadyState best_eval = eval_hi;
    while (beta_min / beta_max < 1.0 - params.delta && beta_max > 1e-12) {
        const double beta = 0.5 * (beta_min + beta_max);
        auto [policy, eval] = probe(beta);
        if (eval.avg_power > budget) {
            beta_min = beta;
        } else {
            beta_max = beta;
            best_policy = std::move(policy);
            best_eval = eval;
        }
    }

    out.feasible = true;
    out.beta = beta_max;
    out.policy = std::move(best_policy);
    out.latency = best_eval.latency_frames;
    out.avg_power = best_eval.avg_power;
    return out;
}

struct EpsRecord {
    double eps = 0.0;
    bool feasible = false;
    std::string infeasible_reason;
    double beta = 0.0;
    queue::Policy policy;
    double latency = 0.0;    // frames, exact chain evaluation
    double avg_power = 0.0;
};

struct MdpSolution {
    std::vector<EpsRecord> records; // one per grid point, grid order
    int chosen = -1;                // argmin-latency feasible record

    bool all_infeasible() const { return chosen < 0; }
    const EpsRecord& best() const {
        if (chosen < 0) throw InfeasibleError("no feasible target error rate in the grid");
        return records[static_cast<std::size_t>(chosen)];
    }
};

/// The target-error-rate grids evaluated in the experiments:
/// {0.01%..0.09%}, {0.1%..0.9%} and {1%..20%}.
inline std::vector<double> default_eps_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 9; ++i) grid.push_back(i / 10000.0);
    for (int i = 1; i <= 9; ++i) grid.push_back(i / 1000.0);
    for (int i = 1; i <= 20; ++i) grid.push_back(i / 100.0);
    return grid;
}

/// Full joint control solve: for every admissible target error rate in the
/// grid, find the power-feasible latency-optimal rate adaptation, then pick
/// the error rate with the smallest latency (ties toward higher reliability).
/// Grid points above eps_max are reported reliability-infeasible rather than
/// silently evaluated.
inline MdpSolution solve(const SystemConfig& cfg, const GainDistribution& dist,
                         const std::vector<double>& eps_grid,
                         const SolverParams& params = SolverParams{}) {
    cfg.validate();
    params.validate();
    if (eps_grid.empty()) throw ConfigError("eps grid must be nonempty");

    MdpSolution solution;
    solution.records.resize(eps_grid.size());
    parallel_for(eps_grid.size(), [&](std::size_t i) {
        EpsRecord rec;
        rec.eps = eps_grid[i];
        if (!(rec.eps > 0.0) || rec.eps >= 1.0) {
            rec.infeasible_reason = "eps outside (0, 1)";
        } else if (rec.eps > cfg.eps_max * (1.0 + 1e-12)) {
            rec.infeasible_reason = "eps above reliability cap eps_max";
        } else {
            try {
                BisectResult bisect = bisect_beta(rec.eps, cfg, dist, params);
                rec.beta = bisect.beta;
                rec.policy = std::move(bisect.policy);
                rec.latency = bisect.latency;
                rec.avg_power = bisect.avg_power;
                if (bisect.feasible &&
                    rec.avg_power <= cfg.power_budget * (1.0 + params.power_tol)) {
                    rec.feasible = true;
                } else {
                    rec.infeasible_reason = "power budget unattainable at this eps";
                }
            } catch (const InfeasibleError& e) {
                rec.infeasible_reason = e.what();
            }
        }
        solution.records[i] = std::move(rec);
    });

    for (std::size_t i = 0; i < solution.records.size(); ++i) {
        const EpsRecord& rec = solution.records[i];
        if (!rec.feasible) continue;
        if (solution.chosen < 0) {
            solution.chosen = static_cast<int>(i);
            continue;
        }
        const EpsRecord& cur = solution.records[static_cast<std::size_t>(solution.chosen)];
        const bool better = rec.latency < cur.latency ||
                            (rec.latency == cur.latency && rec.eps < cur.eps);
        if (better) solution.chosen = static_cast<int>(i);
    }
    return solution;
}

} // namespace mmlat::mdp
