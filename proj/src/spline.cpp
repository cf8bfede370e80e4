#include "kangc/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kangc {

namespace {

void check_knots(const std::vector<double>& knots, int grid_size, int order) {
    if (order < 0) throw std::invalid_argument("spline order must be >= 0");
    if (grid_size < 1) throw std::invalid_argument("grid_size must be >= 1");
    const std::size_t expected = static_cast<std::size_t>(grid_size + 2 * order + 1);
    if (knots.size() != expected) {
        throw std::invalid_argument("knot count " + std::to_string(knots.size()) +
                                    " does not match grid_size + 2*order + 1 = " +
                                    std::to_string(expected));
    }
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        if (!(knots[i] < knots[i + 1])) {
            throw std::invalid_argument("knots must be strictly increasing (violated at index " +
                                        std::to_string(i + 1) + ")");
        }
    }
    for (double t : knots) {
        if (!std::isfinite(t)) throw std::invalid_argument("knots must be finite");
    }
}

}  // namespace

SplineGrid::SplineGrid(int grid_size, int order, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("spline grid requires lo < hi");
    grid_size_ = grid_size;
    order_ = order;
    lo_ = lo;
    hi_ = hi;
    const double h = (hi - lo) / grid_size;
    knots_.resize(static_cast<std::size_t>(grid_size + 2 * order + 1));
    for (int i = 0; i < static_cast<int>(knots_.size()); ++i) {
        knots_[static_cast<std::size_t>(i)] = lo + (i - order) * h;
    }
    check_knots(knots_, grid_size_, order_);
}

SplineGrid SplineGrid::from_knots(std::vector<double> knots, int order) {
    SplineGrid g;
    g.order_ = order;
    g.grid_size_ = static_cast<int>(knots.size()) - 2 * order - 1;
    check_knots(knots, g.grid_size_, order);
    g.lo_ = knots[static_cast<std::size_t>(order)];
    g.hi_ = knots[knots.size() - 1 - static_cast<std::size_t>(order)];
    g.knots_ = std::move(knots);
    return g;
}

// Full-table Cox-de Boor over the extended knots. Half-open interval
// convention, so the grid's upper bound lands in the first extension
// interval and partition of unity holds on all of [lo, hi]. `work` is
// caller scratch of size knots()-1; `deriv_out` may be null.
void SplineGrid::eval(double x, double* work, double* basis_out, double* deriv_out) const {
    const double* t = knots_.data();
    const int m = static_cast<int>(knots_.size()) - 1;  // number of degree-0 functions
    const int nb = num_basis();
    for (int i = 0; i < m; ++i) {
        work[i] = (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
    }
    if (order_ == 0) {
        std::copy_n(work, nb, basis_out);
        if (deriv_out != nullptr) std::fill_n(deriv_out, nb, 0.0);
        return;
    }
    for (int d = 1; d < order_; ++d) {
        for (int i = 0; i + d < m; ++i) {
            const double left = (x - t[i]) / (t[i + d] - t[i]) * work[i];
            const double right = (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * work[i + 1];
            work[i] = left + right;
        }
    }
    // `work` now holds the degree order-1 values; the derivative identity
    // d/dx B_{i,o} = o*( B_{i,o-1}/(t_{i+o}-t_i) - B_{i+1,o-1}/(t_{i+o+1}-t_{i+1}) )
    // comes for free before the final degree pass.
    const int d = order_;
    if (deriv_out != nullptr) {
        for (int i = 0; i < nb; ++i) {
            deriv_out[i] = d * (work[i] / (t[i + d] - t[i]) - work[i + 1] / (t[i + d + 1] - t[i + 1]));
        }
    }
    for (int i = 0; i + d < m; ++i) {
        const double left = (x - t[i]) / (t[i + d] - t[i]) * work[i];
        const double right = (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * work[i + 1];
        work[i] = left + right;
    }
    std::copy_n(work, nb, basis_out);
}

void SplineGrid::basis(double x, std::span<double> out) const {
    if (static_cast<int>(out.size()) != num_basis()) {
        throw std::invalid_argument("basis output span has wrong size");
    }
    std::vector<double> work(knots_.size() - 1);
    eval(x, work.data(), out.data(), nullptr);
}

std::vector<double> SplineGrid::basis(double x) const {
    std::vector<double> out(static_cast<std::size_t>(num_basis()));
    basis(x, out);
    return out;
}

void SplineGrid::basis_and_derivative(double x, std::span<double> basis_out,
                                      std::span<double> deriv_out) const {
    if (static_cast<int>(basis_out.size()) != num_basis() ||
        static_cast<int>(deriv_out.size()) != num_basis()) {
        throw std::invalid_argument("basis output span has wrong size");
    }
    std::vector<double> work(knots_.size() - 1);
    eval(x, work.data(), basis_out.data(), deriv_out.data());
}

void SplineGrid::basis_matrix(const Eigen::MatrixXd& x, Eigen::MatrixXd& phi) const {
    const int nb = num_basis();
    phi.resize(x.rows(), x.cols() * nb);
    std::vector<double> work(knots_.size() - 1);
    std::vector<double> buf(static_cast<std::size_t>(nb));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index b = 0; b < x.rows(); ++b) {
            eval(x(b, j), work.data(), buf.data(), nullptr);
            for (int k = 0; k < nb; ++k) phi(b, j * nb + k) = buf[static_cast<std::size_t>(k)];
        }
    }
}

void SplineGrid::basis_and_derivative_matrix(const Eigen::MatrixXd& x, Eigen::MatrixXd& phi,
                                             Eigen::MatrixXd& dphi) const {
    const int nb = num_basis();
    phi.resize(x.rows(), x.cols() * nb);
    dphi.resize(x.rows(), x.cols() * nb);
    std::vector<double> work(knots_.size() - 1);
    std::vector<double> buf(static_cast<std::size_t>(nb));
    std::vector<double> dbuf(static_cast<std::size_t>(nb));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index b = 0; b < x.rows(); ++b) {
            eval(x(b, j), work.data(), buf.data(), dbuf.data());
            for (int k = 0; k < nb; ++k) {
                phi(b, j * nb + k) = buf[static_cast<std::size_t>(k)];
                dphi(b, j * nb + k) = dbuf[static_cast<std::size_t>(k)];
            }
        }
    }
}

}  // namespace kangc
