#pragma once

// Data generators for the benchmark settings: three-sample Gaussians, the
// multiway triangle, nested multilevel Gaussians, and three-sample rotated
// versions of a registry of two-variable dependence simulations.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ksample/core.hpp"
#include "ksample/encoding.hpp"
#include "ksample/error.hpp"
#include "ksample/parallel.hpp"

namespace ksample {

using Rng = std::mt19937_64;

/// Rotation angle in degrees, normalized into [0, 360).
class RotationAngle {
public:
    explicit RotationAngle(double degrees) : degrees_(std::fmod(degrees, 360.0)) {
        if (!std::isfinite(degrees)) throw InputError("rotation angle must be finite");
        if (degrees_ < 0.0) degrees_ += 360.0;
        if (degrees_ >= 360.0) degrees_ = 0.0;
    }

    [[nodiscard]] double degrees() const noexcept { return degrees_; }
    [[nodiscard]] double radians() const noexcept { return degrees_ * std::numbers::pi / 180.0; }
    [[nodiscard]] RotationAngle inverse() const { return RotationAngle(-degrees_); }

private:
    double degrees_;
};

enum class GaussianSetting { none_diff, one_diff, all_diff };

inline DataMatrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    DataMatrix m(rows, cols);
    // Fill row by row so that a prefix of columns does not depend on the width.
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = z(rng);
    }
    return m;
}

inline DataMatrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    DataMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
    }
    return m;
}

/// Group means (first two coordinates) of the three-sample Gaussian settings.
inline std::vector<Eigen::Vector2d> gaussian_means(GaussianSetting setting, double eps) {
    const double r3 = std::sqrt(3.0);
    switch (setting) {
        case GaussianSetting::none_diff:
            return {Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0)};
        case GaussianSetting::one_diff:
            return {Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0), Eigen::Vector2d(0, eps)};
        case GaussianSetting::all_diff:
            return {Eigen::Vector2d(0, r3 / 3.0 * eps), Eigen::Vector2d(-eps / 2.0, -r3 / 6.0 * eps),
                    Eigen::Vector2d(eps / 2.0, -r3 / 6.0 * eps)};
    }
    return {};
}

/// Three identity-covariance Gaussians with the setting's means in the first
/// two coordinates; coordinates beyond the second are standard normal noise.
inline KSampleData gaussian_three_sample(GaussianSetting setting, double eps, Eigen::Index p, Eigen::Index n,
                                         std::uint64_t seed) {
    if (p < 2) throw InputError("three-sample Gaussians need p >= 2");
    if (n < 1) throw InputError("each group needs at least one sample");
    Rng rng(seed);
    const auto means = gaussian_means(setting, eps);
    std::vector<DataMatrix> groups;
    for (const auto& mu : means) {
        DataMatrix g = standard_normal(n, p, rng);
        g.col(0).array() += mu(0);
        g.col(1).array() += mu(1);
        groups.push_back(std::move(g));
    }
    return KSampleData(std::move(groups));
}

struct MultiwayData {
    KSampleData data;
    std::vector<std::vector<std::size_t>> memberships;
};

inline std::vector<Eigen::Vector2d> multiway_means(double eps, double c) {
    if (!(eps >= 0.0) || eps > 2.0 * c) throw GeometryError("multiway triangle needs 0 <= eps <= 2c");
    const double h = std::sqrt(std::max(0.0, c * c - eps * eps / 4.0));
    return {Eigen::Vector2d(0, 0), Eigen::Vector2d(-eps / 2.0, -h), Eigen::Vector2d(eps / 2.0, -h)};
}

/// Multiway triangle: one Gaussian at the origin, two at distance c from it
/// and eps from each other. Memberships follow the displayed w = 2 pattern.
inline MultiwayData multiway_gaussian(double eps, double c, Eigen::Index p, Eigen::Index n, std::uint64_t seed) {
    if (p < 2) throw InputError("multiway Gaussians need p >= 2");
    const auto means = multiway_means(eps, c);
    Rng rng(seed);
    std::vector<DataMatrix> groups;
    for (const auto& mu : means) {
        DataMatrix g = standard_normal(n, p, rng);
        g.col(0).array() += mu(0);
        g.col(1).array() += mu(1);
        groups.push_back(std::move(g));
    }
    return {KSampleData(std::move(groups)), {{0, 2}, {0, 1}, {1, 2}}};
}

struct MultilevelData {
    KSampleData data;
    BlockStructure blocks;            // over the pooled rows
    std::vector<DataMatrix> subject_means;  // one n_means x 2 matrix per group
};

inline constexpr double kMultilevelWithinVariance = 0.1;

/// Two groups of subjects; subject means ~ N(center_g, I) with centers (0, 0)
/// and (eps, 0); each subject contributes n_per observations ~ N(mean, 0.1 I).
/// Rows are ordered by subject so blocks are contiguous.
inline MultilevelData multilevel_gaussian(double eps, std::size_t n_means, std::size_t n_per, std::uint64_t seed) {
    if (n_means < 1) throw InputError("multilevel simulation needs at least one subject per group");
    if (n_per < 2) throw InputError("multilevel simulation needs at least two observations per subject");
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const double sd = std::sqrt(kMultilevelWithinVariance);
    MultilevelData out;
    std::vector<DataMatrix> groups;
    for (int g = 0; g < 2; ++g) {
        const Eigen::Vector2d center(g == 0 ? 0.0 : eps, 0.0);
        DataMatrix means(static_cast<Eigen::Index>(n_means), 2);
        DataMatrix obs(static_cast<Eigen::Index>(n_means * n_per), 2);
        for (std::size_t s = 0; s < n_means; ++s) {
            const auto si = static_cast<Eigen::Index>(s);
            means(si, 0) = center(0) + z(rng);
            means(si, 1) = center(1) + z(rng);
            for (std::size_t r = 0; r < n_per; ++r) {
                const auto row = static_cast<Eigen::Index>(s * n_per + r);
                obs(row, 0) = means(si, 0) + sd * z(rng);
                obs(row, 1) = means(si, 1) + sd * z(rng);
            }
        }
        out.subject_means.push_back(std::move(means));
        groups.push_back(std::move(obs));
    }
    out.data = KSampleData(std::move(groups));
    out.blocks = make_blocks(2 * n_means, n_per);
    return out;
}

/// Rotation in the (first, last) coordinate plane: z -> Q_theta z with
/// Q(0,0) = cos, Q(0,p-1) = -sin, Q(p-1,0) = sin, Q(p-1,p-1) = cos.
inline DataMatrix rotate(const DataMatrix& z, RotationAngle theta) {
    if (z.cols() < 2) throw InputError("rotation needs at least two columns");
    const double c = std::cos(theta.radians());
    const double s = std::sin(theta.radians());
    const Eigen::Index last = z.cols() - 1;
    DataMatrix out = z;
    out.col(0) = c * z.col(0) - s * z.col(last);
    out.col(last) = s * z.col(0) + c * z.col(last);
    return out;
}

// ---------------------------------------------------------------------------
// Registry of base dependence simulations. Each returns Z = [X | Y] with p
// columns of X and one column of Y. w_i = 1/i weights the X coordinates.

using SimulationFn = std::function<DataMatrix(Eigen::Index n, Eigen::Index p, double kappa, Rng& rng)>;

namespace sim_detail {

inline Eigen::VectorXd weights(Eigen::Index p) {
    Eigen::VectorXd w(p);
    for (Eigen::Index i = 0; i < p; ++i) w(i) = 1.0 / static_cast<double>(i + 1);
    return w;
}

inline DataMatrix join(const DataMatrix& x, const Eigen::VectorXd& y) {
    DataMatrix z(x.rows(), x.cols() + 1);
    z.leftCols(x.cols()) = x;
    z.col(x.cols()) = y;
    return z;
}

inline Eigen::VectorXd noise(Eigen::Index n, double kappa, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::VectorXd e(n);
    for (Eigen::Index i = 0; i < n; ++i) e(i) = kappa * z(rng);
    return e;
}

inline DataMatrix linear(Eigen::Index n, Eigen::Index p, double kappa, Rng& rng) {
    const DataMatrix x = uniform_matrix(n, p, -1.0, 1.0, rng);
    return join(x, x * weights(p) + noise(n, kappa, rng));
}

inline DataMatrix quadratic(Eigen::Index n, Eigen::Index p, double kappa, Rng& rng) {
    const DataMatrix x = uniform_matrix(n, p, -1.0, 1.0, rng);
    const Eigen::VectorXd t = x * weights(p);
    return join(x, t.array().square().matrix() + noise(n, kappa, rng));
}

inline DataMatrix cubic(Eigen::Index n, Eigen::Index p, double kappa, Rng& rng) {
    const DataMatrix x = uniform_matrix(n, p, -1.0, 1.0, rng);
    const Eigen::ArrayXd t = (x * weights(p)).array() - 1.0 / 3.0;
    const Eigen::VectorXd y = (128.0 * t.cube() + 48.0 * t.square() - 12.0 * t).matrix();
    return join(x, y + noise(n, kappa, rng));
}

/// U ~ Uniform(0, 5); (U cos(pi U), U sin(pi U)). Extra X columns are Uniform(-1, 1).
inline DataMatrix spiral(Eigen::Index n, Eigen::Index p, double kappa, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 5.0);
    DataMatrix x = uniform_matrix(n, p, -1.0, 1.0, rng);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = u(rng);
        x(i, 0) = t * std::cos(std::numbers::pi * t);
        y(i) = t * std::sin(std::numbers::pi * t);
    }
    return join(x, y + noise(n, kappa, rng));
}

/// U ~ Uniform(-1, 1); (cos(pi U), sin(pi U)) with noise on the Y coordinate only.
inline DataMatrix circle(Eigen::Index n, Eigen::Index p, double kappa, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DataMatrix x = uniform_matrix(n, p, -1.0, 1.0, rng);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = u(rng);
        x(i, 0) = std::cos(std::numbers::pi * t);
        y(i) = std::sin(std::numbers::pi * t);
    }
    return join(x, y + noise(n, kappa, rng));
}

inline DataMatrix sine(Eigen::Index n, Eigen::Index p, double kappa, Rng& rng) {
    const DataMatrix x = uniform_matrix(n, p, -1.0, 1.0, rng);
    const Eigen::ArrayXd t = (x * weights(p)).array();
    return join(x, (4.0 * std::numbers::pi * t).sin().matrix() + noise(n, kappa, rng));
}

inline DataMatrix w_shape(Eigen::Index n, Eigen::Index p, double kappa, Rng& rng) {
    const DataMatrix x = uniform_matrix(n, p, -1.0, 1.0, rng);
    const DataMatrix jitter = uniform_matrix(n, p, -1.0, 1.0, rng);
    const Eigen::VectorXd w = weights(p);
    const Eigen::ArrayXd t = (x * w).array();
    const Eigen::ArrayXd j = (jitter * w).array();
    const Eigen::VectorXd y = (4.0 * ((t.square() - 0.5).square() + j / 500.0)).matrix();
    return join(x, y + noise(n, kappa, rng));
}

inline DataMatrix independence(Eigen::Index n, Eigen::Index p, double /*kappa*/, Rng& rng) {
    const DataMatrix x = standard_normal(n, p, rng);
    const DataMatrix y = standard_normal(n, 1, rng);
    return join(x, y.col(0));
}

}  // namespace sim_detail

/// Name -> generator. Open for extension through register_simulation.
inline std::map<std::string, SimulationFn>& simulation_registry() {
    static std::map<std::string, SimulationFn> registry{
        {"linear", sim_detail::linear},       {"quadratic", sim_detail::quadratic},
        {"cubic", sim_detail::cubic},         {"spiral", sim_detail::spiral},
        {"circle", sim_detail::circle},       {"sine", sim_detail::sine},
        {"w_shape", sim_detail::w_shape},     {"independence", sim_detail::independence},
    };
    return registry;
}

inline void register_simulation(const std::string& id, SimulationFn fn) {
    simulation_registry()[id] = std::move(fn);
}

inline std::vector<std::string> simulation_ids() {
    std::vector<std::string> ids;
    for (const auto& [id, fn] : simulation_registry()) ids.push_back(id);
    return ids;
}

inline const SimulationFn& find_simulation(const std::string& id) {
    const auto& reg = simulation_registry();
    const auto it = reg.find(id);
    if (it == reg.end()) throw InputError("unknown simulation id: " + id);
    return it->second;
}

inline constexpr double kDefaultNoise = 1.0;

/// n draws of Z = [X | Y] (p + 1 columns) from a registered simulation.
inline DataMatrix base_simulation(const std::string& id, Eigen::Index n, Eigen::Index p, double kappa,
                                  std::uint64_t seed) {
    const auto& fn = find_simulation(id);
    if (n < 1 || p < 1) throw InputError("simulation needs n >= 1 and p >= 1");
    Rng rng(seed);
    return fn(n, p, kappa, rng);
}

/// Three independent draws of the base simulation; the second is rotated by
/// +theta and the third by -theta.
inline KSampleData rotated_three_sample(const std::string& id, RotationAngle theta, Eigen::Index n, Eigen::Index p,
                                        double kappa, std::uint64_t seed) {
    const auto& fn = find_simulation(id);
    if (n < 1 || p < 1) throw InputError("simulation needs n >= 1 and p >= 1");
    std::vector<DataMatrix> groups;
    for (std::uint64_t g = 0; g < 3; ++g) {
        Rng rng(derive_seed(seed, g));
        groups.push_back(fn(n, p, kappa, rng));
    }
    groups[1] = rotate(groups[1], theta);
    groups[2] = rotate(groups[2], theta.inverse());
    return KSampleData(std::move(groups));
}

}  // namespace ksample
