#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace kangc {

/// Extended B-spline knot grid. For grid_size intervals on [lo, hi] with
/// spline degree `order`, the knot vector is extended by `order` uniform
/// steps on each side so that all grid_size + order basis functions have
/// full support inside [lo, hi]. Knot count = grid_size + 2*order + 1.
///
/// Inputs outside [lo, hi] are legal: basis functions are evaluated on the
/// extended knots and decay to zero outside their span. Partition of unity
/// holds only inside [lo, hi].
class SplineGrid {
public:
    SplineGrid(int grid_size, int order, double lo, double hi);

    /// Arbitrary (strictly increasing) knot vector, mostly for tests.
    /// Expects knots.size() == grid_size + 2*order + 1 for some grid_size >= 1.
    static SplineGrid from_knots(std::vector<double> knots, int order);

    int order() const { return order_; }
    int grid_size() const { return grid_size_; }
    int num_basis() const { return grid_size_ + order_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<double>& knots() const { return knots_; }

    /// Cox-de Boor evaluation of all num_basis() functions at x.
    /// out.size() must equal num_basis().
    void basis(double x, std::span<double> out) const;
    std::vector<double> basis(double x) const;

    /// Basis values and first derivatives in one pass; the derivative
    /// recursion reuses the degree order-1 table.
    void basis_and_derivative(double x, std::span<double> basis_out,
                              std::span<double> deriv_out) const;

    /// Batched evaluation for a layer input block X (rows x cols).
    /// phi/dphi get shape rows x (cols * num_basis); column j*num_basis + k
    /// holds basis k of input column j.
    void basis_matrix(const Eigen::MatrixXd& x, Eigen::MatrixXd& phi) const;
    void basis_and_derivative_matrix(const Eigen::MatrixXd& x, Eigen::MatrixXd& phi,
                                     Eigen::MatrixXd& dphi) const;

    bool operator==(const SplineGrid& other) const = default;

private:
    SplineGrid() = default;

    void eval(double x, double* work, double* basis_out, double* deriv_out) const;

    std::vector<double> knots_;
    int grid_size_ = 0;
    int order_ = 0;
    double lo_ = 0.0;
    double hi_ = 0.0;
};

}  // namespace kangc
