// Minimal dense linear algebra: row-major matrix, cyclic Jacobi
// eigendecomposition for symmetric matrices, and a pivoted linear solver.
#pragma once

#include <changechip/image.hpp>

#include <cmath>
#include <vector>

namespace changechip {

class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols),
          data_(static_cast<size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
    const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

struct SymmetricEigen {
    std::vector<double> values;  // descending
    Matrix vectors;              // row i = eigenvector for values[i], orthonormal
};

// Cyclic Jacobi sweeps; fine for the covariance sizes this project sees
// (d <= a few hundred). Input must be symmetric.
inline SymmetricEigen symmetric_eigen(const Matrix& a_in) {
    const int n = a_in.rows();
    if (n != a_in.cols()) throw Error("symmetric_eigen: matrix must be square");

    Matrix a = a_in;
    Matrix v(n, n, 0.0);
    for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-300) break;

        double thresh = (sweep < 3) ? 0.2 * off / (n * n) : 0.0;

        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                const double scale_ref = 1e-15 * (std::abs(a.at(p, p)) + std::abs(a.at(q, q)));
                if (std::abs(apq) <= scale_ref || apq * apq <= thresh) continue;

                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e12) {
                    t = 1.0 / (2.0 * theta);
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                const double app = a.at(p, p), aqq = a.at(q, q);
                a.at(p, p) = app - t * apq;
                a.at(q, q) = aqq + t * apq;
                a.at(p, q) = 0.0;
                a.at(q, p) = 0.0;

                for (int i = 0; i < n; ++i) {
                    if (i != p && i != q) {
                        const double aip = a.at(i, p), aiq = a.at(i, q);
                        a.at(i, p) = aip - s * (aiq + tau * aip);
                        a.at(i, q) = aiq + s * (aip - tau * aiq);
                        a.at(p, i) = a.at(i, p);
                        a.at(q, i) = a.at(i, q);
                    }
                    const double vip = v.at(i, p), viq = v.at(i, q);
                    v.at(i, p) = vip - s * (viq + tau * vip);
                    v.at(i, q) = viq + s * (vip - tau * viq);
                }
                rotated = true;
            }
        }
        if (!rotated) break;
    }

    // Sort descending by eigenvalue; ties keep original column order.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a.at(i, i) > a.at(j, j); });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (int i = 0; i < n; ++i) {
        out.values[i] = a.at(order[i], order[i]);
        for (int j = 0; j < n; ++j) out.vectors.at(i, j) = v.at(j, order[i]);
    }
    return out;
}

// Solve A x = b in place via Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
    const int n = a.rows();
    if (n != a.cols() || static_cast<int>(b.size()) != n)
        throw Error("solve_linear: dimension mismatch");

    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::abs(a.at(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double cand = std::abs(a.at(r, col));
            if (cand > best) {
                best = cand;
                pivot = r;
            }
        }
        if (best < 1e-14) throw Error("solve_linear: singular system");
        if (pivot != col) {
            for (int c = 0; c < n; ++c) std::swap(a.at(pivot, c), a.at(col, c));
            std::swap(b[pivot], b[col]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = a.at(r, col) / a.at(col, col);
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a.at(r, c) -= f * a.at(col, c);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a.at(r, c) * x[c];
        x[r] = acc / a.at(r, r);
    }
    return x;
}

}  // namespace changechip
