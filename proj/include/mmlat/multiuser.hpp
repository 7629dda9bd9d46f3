#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mmlat/config.hpp"
#include "mmlat/errors.hpp"
#include "mmlat/gain_distribution.hpp"
#include "mmlat/lyrrc.hpp"
#include "mmlat/mdp.hpp"
#include "mmlat/parallel.hpp"
#include "mmlat/rng.hpp"

namespace mmlat::multiuser {

using ComplexMatrix = Eigen::MatrixXcd;

/// Zero-forcing per-antenna gain of user k from the estimated channel matrix:
///   kappa = { M [ (H^H H)^-1 ]_kk }^-1,
/// computed through a factorization-based solve rather than an explicit
/// inverse. Rejects rank-deficient or ill-conditioned Gram matrices
/// (condition number above 1e12), which measured traces can produce.
inline double mu_per_antenna_gain(const ComplexMatrix& estimated, Eigen::Index k) {
    const Eigen::Index m = estimated.rows();
    const Eigen::Index users = estimated.cols();
    if (m < 1 || users < 1) throw ConfigError("estimated channel matrix is empty");
    if (m <= users) throw ConfigError("zero-forcing requires more antennas than users");
    if (k < 0 || k >= users) throw ConfigError("user index out of range");

    const ComplexMatrix gram = estimated.adjoint() * estimated;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(gram);
    if (eig.info() != Eigen::Success)
        throw SingularMatrixError("Gram eigendecomposition failed");
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12)
        throw SingularMatrixError("Gram matrix is singular or ill-conditioned");

    Eigen::VectorXcd unit = Eigen::VectorXcd::Zero(users);
    unit(k) = 1.0;
    const Eigen::VectorXcd column = eig.eigenvectors() *
        (eig.eigenvectors().adjoint() * unit).cwiseQuotient(
            eig.eigenvalues().cast<std::complex<double>>());
    const double diag = column(k).real();
    return 1.0 / (static_cast<double>(m) * diag);
}

namespace detail {

/// Diagonal entry [W^-1]_00 of a standard complex Wishart matrix W = H0^H H0
/// drawn from the given rng (H0 is M x K standard complex Gaussian).
inline double inverse_wishart_diag(int antennas, int users, CounterRng& rng) {
    ComplexMatrix h0(antennas, users);
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    for (Eigen::Index c = 0; c < users; ++c)
        for (Eigen::Index r = 0; r < antennas; ++r)
            h0(r, c) = std::complex<double>(rng.normal() * inv_sqrt2,
                                            rng.normal() * inv_sqrt2);
    const ComplexMatrix gram = h0.adjoint() * h0;
    Eigen::LDLT<ComplexMatrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw SingularMatrixError("Wishart Gram not positive definite");
    Eigen::VectorXcd unit = Eigen::VectorXcd::Zero(users);
    unit(0) = 1.0;
    return ldlt.solve(unit)(0).real();
}

/// RNG key for a decoupled user: the gain distribution depends only on
/// (M, N, K) and the user's own estimate variance, so users with identical
/// statistics share draws bit-for-bit and other users' parameters cannot
/// perturb a user's solution.
inline std::uint64_t user_content_key(const SystemConfig& cfg) {
    const std::uint64_t dims =
        CounterRng::mix3(static_cast<std::uint64_t>(cfg.antennas),
                         static_cast<std::uint64_t>(cfg.subcarriers),
                         static_cast<std::uint64_t>(cfg.users));
    return CounterRng::mix3(dims, bits_of(cfg.estimate_variance()), 0x6d75ULL);
}

} // namespace detail

/// Monte-Carlo draws of M [W^-1]_kk for a standard complex Wishart matrix
/// with M degrees of freedom (moment-validation utility; the analytic mean is
/// M / (M - K)).
inline std::vector<double> sample_scaled_inverse_wishart_diag(int antennas, int users,
                                                              std::size_t n_samples,
                                                              std::uint64_t seed) {
    if (antennas <= users || users < 1) throw ConfigError("need antennas > users >= 1");
    std::vector<double> out(n_samples);
    parallel_for(n_samples, [&](std::size_t i) {
        CounterRng rng(seed, derive_stream("wishart", i));
        out[i] = antennas * detail::inverse_wishart_diag(antennas, users, rng);
    });
    return out;
}

/// Empirical effective-gain distribution of one decoupled user: each sample
/// is the geometric mean over N subcarriers of kappa = c / (M [W^-1]_00),
/// where c is the user's estimate variance. Exchangeability of the Wishart
/// columns lets every user read diagonal 0 of its own stream.
inline GainDistribution build_mu_gain_distribution(const SystemConfig& cfg,
                                                   std::size_t n_samples,
                                                   std::uint64_t seed) {
    cfg.validate();
    if (cfg.mode != LinkMode::multiuser)
        throw ConfigError("multiuser gain sampling requires multiuser mode");
    if (n_samples < 1000)
        throw ConfigError("n_samples must be >= 1000 for usable quantile resolution");
    const double c = cfg.estimate_variance();
    const std::uint64_t user_seed = CounterRng::mix3(seed, detail::user_content_key(cfg), 0);
    std::vector<double> etas(n_samples);
    parallel_for(n_samples, [&](std::size_t i) {
        double log_sum = 0.0;
        for (int n = 1; n <= cfg.subcarriers; ++n) {
            CounterRng rng(user_seed, derive_stream("mu-channel", i, n));
            const double diag = detail::inverse_wishart_diag(cfg.antennas, cfg.users, rng);
            log_sum += std::log(c / (cfg.antennas * diag));
        }
        etas[i] = std::exp(log_sum / static_cast<double>(cfg.subcarriers));
    });
    return GainDistribution::from_samples(std::move(etas));
}

struct DecoupledUser {
    SystemConfig cfg;                        // multiuser-mode single-user problem
    std::shared_ptr<const GainDistribution> dist;
    double weight = 1.0;
};

/// Decouple the K-user problem into K independent single-user problems with
/// the multiuser power map and per-user effective-gain distributions.
/// Distributions are cached by content key, so identical users share one.
inline std::vector<DecoupledUser> decouple(const MultiuserConfig& mu_cfg,
                                           std::size_t n_samples, std::uint64_t seed) {
    mu_cfg.validate();
    std::vector<DecoupledUser> out;
    out.reserve(mu_cfg.user.size());
    std::map<std::uint64_t, std::shared_ptr<const GainDistribution>> cache;
    for (const UserConfig& u : mu_cfg.user) {
        DecoupledUser d;
        d.cfg = mu_cfg.single_user_view(u);
        d.weight = u.weight;
        const std::uint64_t key = detail::user_content_key(d.cfg);
        auto it = cache.find(key);
        if (it == cache.end()) {
            it = cache.emplace(key, std::make_shared<const GainDistribution>(
                                        build_mu_gain_distribution(d.cfg, n_samples, seed)))
                     .first;
        }
        d.dist = it->second;
        out.push_back(std::move(d));
    }
    return out;
}

enum class SolveMode { mdp, lyrrc };

struct PerUserSolution {
    int user = 0;
    bool feasible = false;
    std::string infeasible_reason;
    double latency_frames = 0.0;
    double weight = 1.0;
    std::optional<mdp::MdpSolution> mdp_solution;
    std::optional<lyrrc::LyrrcResult> lyrrc_result;
};

struct MultiuserSolution {
    std::vector<PerUserSolution> users;
    double weighted_latency = 0.0;   // sum of w_k D_k over feasible users
    std::vector<int> infeasible_users;

    bool all_feasible() const { return infeasible_users.empty(); }
};

/// Solve every decoupled user with the chosen method and aggregate the
/// weighted latency objective. Weights only scale the reported objective;
/// per-user policies are unaffected by them.
inline MultiuserSolution solve_all(const std::vector<DecoupledUser>& users, SolveMode mode,
                                   const std::vector<double>& eps_grid = {},
                                   const mdp::SolverParams& params = mdp::SolverParams{}) {
    MultiuserSolution out;
    out.users.resize(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) {
        const DecoupledUser& d = users[i];
        PerUserSolution& sol = out.users[i];
        sol.user = static_cast<int>(i);
        sol.weight = d.weight;
        try {
            if (mode == SolveMode::mdp) {
                const auto grid = eps_grid.empty() ? mdp::default_eps_grid() : eps_grid;
                mdp::MdpSolution ms = mdp::solve(d.cfg, *d.dist, grid, params);
                if (ms.all_infeasible()) {
                    sol.infeasible_reason = "no feasible target error rate in the grid";
                } else {
                    sol.feasible = true;
                    sol.latency_frames = ms.best().latency;
                }
                sol.mdp_solution = std::move(ms);
            } else {
                lyrrc::LyrrcResult lr = lyrrc::evaluate(d.cfg, *d.dist);
                if (!lr.reliability_feasible) {
                    sol.infeasible_reason = "eps_o exceeds the reliability cap";
                } else {
                    sol.feasible = true;
                    sol.latency_frames = lr.latency_frames;
                }
                sol.lyrrc_result = std::move(lr);
            }
        } catch (const std::runtime_error& e) {
            sol.infeasible_reason = e.what();
        }
        if (sol.feasible) {
            out.weighted_latency += sol.weight * sol.latency_frames;
        } else {
            out.infeasible_users.push_back(sol.user);
        }
    }
    return out;
}

} // namespace mmlat::multiuser
