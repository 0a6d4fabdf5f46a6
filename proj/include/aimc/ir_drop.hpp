#ifndef AIMC_IR_DROP_HPP
#define AIMC_IR_DROP_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace aimc {

// Row j (0-based) of a tile's weight block sits j + 1 crosspoints away from
// the column's readout node, so partially filled tiles occupy the rows closest
// to the periphery. All quantities are in normalized units: weights and
// inputs in [-1, 1], currents in units of g_max * V_read.

/// Quadratic position profile 1 - (1 - (j + 1) / n)^2 for n occupied rows.
inline Eigen::VectorXd ir_drop_profile(Eigen::Index n)
{
    Eigen::VectorXd f(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double r = 1.0 - static_cast<double>(j + 1) / static_cast<double>(n);
        f(j) = 1.0 - r * r;
    }
    return f;
}

inline double ir_drop_cubic(double a) { return a * (a * (0.05 * a - 0.2) + 0.5); }

/// Approximate IR-drop deviation of every output for a batch of inputs.
///
/// weights: out x in, inputs: in x batch. Returns out x batch:
///   a_i = gamma * n * sum_j |w_ij| |x_j|
///   c_i = 0.05 a^3 - 0.2 a^2 + 0.5 a
///   dy_i = -scale * c_i * sum_j w_ij x_j f_j
inline Eigen::MatrixXd ir_drop_approx(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& inputs, double gamma,
                                      double scale = 1.0)
{
    const Eigen::Index n = weights.cols();
    if (inputs.rows() != n)
        throw std::invalid_argument("ir_drop_approx: shape mismatch");
    if (scale == 0.0 || gamma == 0.0 || n == 0)
        return Eigen::MatrixXd::Zero(weights.rows(), inputs.cols());
    const Eigen::MatrixXd a = (gamma * static_cast<double>(n)) * (weights.cwiseAbs() * inputs.cwiseAbs());
    const Eigen::VectorXd f = ir_drop_profile(n);
    const Eigen::MatrixXd weighted = weights * (inputs.array().colwise() * f.array()).matrix();
    return (-scale) * a.unaryExpr([](double v) { return ir_drop_cubic(v); }).cwiseProduct(weighted);
}

template <typename Derived>
    requires(Derived::ColsAtCompileTime == 1)
Eigen::VectorXd ir_drop_approx(const Eigen::MatrixXd& weights, const Eigen::MatrixBase<Derived>& x, double gamma,
                               double scale = 1.0)
{
    return ir_drop_approx(weights, Eigen::MatrixXd(x), gamma, scale).col(0);
}

/// Steady-state IR-drop deviation of one column from the bitline nodal
/// equations.
///
/// Node k carries row k. With u_k the bitline voltage deviation (units of
/// V_read) and gamma = g_max / g_wire, Kirchhoff's current law reads
///   (u_{k+1} - u_k) - (u_k - u_{k-1}) - gamma L_k u_k + gamma s_k = 0,
/// where s_k = w_k x_k is the injected time-averaged current and
/// L_k = |w_k| |x_k| the device conductance weighted by its input duty cycle.
/// u_{-1} = 0 is the periphery clamp and the far end is open. The column
/// current is u_0 / gamma; the return value is that current minus sum_k s_k.
inline double ir_drop_exact_column(const Eigen::Ref<const Eigen::VectorXd>& w, const Eigen::Ref<const Eigen::VectorXd>& x,
                                   double gamma)
{
    const Eigen::Index n = w.size();
    if (x.size() != n)
        throw std::invalid_argument("ir_drop_exact: shape mismatch");
    if (!std::isfinite(gamma) || gamma < 0.0)
        throw std::domain_error("ir_drop_exact: wire conductance must be positive (finite gamma)");
    if (gamma == 0.0 || n == 0)
        return 0.0;

    // Thomas algorithm on the tridiagonal system; sub/super diagonals are 1.
    std::vector<double> c_prime(static_cast<std::size_t>(n));
    std::vector<double> d_prime(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        const double load = gamma * std::abs(w(k)) * std::abs(x(k));
        const double diag = (k + 1 == n ? -1.0 : -2.0) - load;
        const double rhs = -gamma * w(k) * x(k);
        const auto i = static_cast<std::size_t>(k);
        if (k == 0) {
            c_prime[i] = 1.0 / diag;
            d_prime[i] = rhs / diag;
        } else {
            const double m = diag - c_prime[i - 1];
            if (m == 0.0)
                throw std::domain_error("ir_drop_exact: singular system");
            c_prime[i] = 1.0 / m;
            d_prime[i] = (rhs - d_prime[i - 1]) / m;
        }
    }
    double u = d_prime.back();
    for (Eigen::Index k = n - 2; k >= 0; --k) {
        const auto i = static_cast<std::size_t>(k);
        u = d_prime[i] - c_prime[i] * u;
    }
    return u / gamma - w.dot(x);
}

/// Exact IR-drop deviation for every output. weights: out x in.
inline Eigen::VectorXd ir_drop_exact(const Eigen::MatrixXd& weights, const Eigen::VectorXd& x, double gamma)
{
    Eigen::VectorXd dy(weights.rows());
    for (Eigen::Index i = 0; i < weights.rows(); ++i)
        dy(i) = ir_drop_exact_column(weights.row(i).transpose(), x, gamma);
    return dy;
}

/// Normalized output (or deviation) to physical current in amperes, given
/// g_max in µS and the read voltage in volts.
inline double to_physical_current(double normalized, double g_max_us, double v_read)
{
    return normalized * g_max_us * 1e-6 * v_read;
}

} // namespace aimc

#endif // AIMC_IR_DROP_HPP
