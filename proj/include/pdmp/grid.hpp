#pragma once

#include "pdmp/model.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace pdmp {

template <typename Scalar>
struct StencilT {
    std::array<std::size_t, (1u << kMaxDim)> index{};
    std::array<Scalar, (1u << kMaxDim)> weight{};
    int size = 0;
    bool clamped = false;
};
using Stencil = StencilT<double>;

/// Tensor-product lattice over a box; nodes include both faces.
template <typename Scalar>
class TensorGridT {
public:
    using StateType = StateT<Scalar>;

    TensorGridT() = default;
    TensorGridT(const BoxT<Scalar>& box, Scalar dx) : box_(box) {
        const int d = box.dim();
        cells_.assign(d, 0);
        spacing_.resize(d);
        num_nodes_ = 1;
        for (int k = 0; k < d; ++k) {
            const Scalar width = box.upper[k] - box.lower[k];
            if (!(width > 0) || !(dx > 0)) throw Error("grid: empty box or nonpositive spacing");
            cells_[k] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(width / dx)));
            spacing_[k] = width / Scalar(cells_[k]);
            num_nodes_ *= cells_[k] + 1;
        }
    }

    int dim() const { return box_.dim(); }
    std::size_t size() const { return num_nodes_; }
    const BoxT<Scalar>& box() const { return box_; }
    Scalar spacing(int k) const { return spacing_[k]; }
    Scalar min_spacing() const { return spacing_.minCoeff(); }
    std::size_t cells(int k) const { return cells_[k]; }

    StateType node(std::size_t i) const {
        StateType x(dim());
        for (int k = 0; k < dim(); ++k) {
            const std::size_t n = cells_[k] + 1;
            x[k] = box_.lower[k] + Scalar(i % n) * spacing_[k];
            i /= n;
        }
        return x;
    }

    bool on_boundary(std::size_t i) const {
        for (int k = 0; k < dim(); ++k) {
            const std::size_t n = cells_[k] + 1;
            const std::size_t j = i % n;
            if (j == 0 || j == cells_[k]) return true;
            i /= n;
        }
        return false;
    }

    /// Multilinear weights; points outside the box are projected onto it.
    StencilT<Scalar> locate(const StateType& x) const {
        StencilT<Scalar> s;
        const int d = dim();
        std::array<std::size_t, kMaxDim> base{};
        std::array<Scalar, kMaxDim> frac{};
        for (int k = 0; k < d; ++k) {
            Scalar u = (x[k] - box_.lower[k]) / spacing_[k];
            const Scalar top = Scalar(cells_[k]);
            if (u < 0) { s.clamped = s.clamped || u < -Scalar(1e-9); u = 0; }
            if (u > top) { s.clamped = s.clamped || u > top + Scalar(1e-9); u = top; }
            std::size_t j = static_cast<std::size_t>(std::floor(u));
            if (j >= cells_[k]) j = cells_[k] - 1;
            base[k] = j;
            frac[k] = u - Scalar(j);
        }
        s.size = 1 << d;
        for (int c = 0; c < s.size; ++c) {
            std::size_t idx = 0, stride = 1;
            Scalar w = 1;
            for (int k = 0; k < d; ++k) {
                const bool up = (c >> k) & 1;
                idx += (base[k] + (up ? 1 : 0)) * stride;
                w *= up ? frac[k] : Scalar(1) - frac[k];
                stride *= cells_[k] + 1;
            }
            s.index[c] = idx;
            s.weight[c] = w;
        }
        return s;
    }

private:
    BoxT<Scalar> box_;
    std::vector<std::size_t> cells_;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> spacing_;
    std::size_t num_nodes_ = 0;
};
using TensorGrid = TensorGridT<double>;

/// Values per node (one layer) or per (node, action) (one layer per action).
template <typename Scalar>
struct GridValueFunctionT {
    using Values = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    TensorGridT<Scalar> grid;
    Values values;  // rows: nodes, cols: layers

    GridValueFunctionT() = default;
    GridValueFunctionT(const TensorGridT<Scalar>& g, Eigen::Index layers)
        : grid(g), values(Values::Zero(static_cast<Eigen::Index>(g.size()), layers)) {}

    Eigen::Index layers() const { return values.cols(); }

    Scalar at(const StencilT<Scalar>& s, Eigen::Index layer = 0) const {
        Scalar v = 0;
        for (int c = 0; c < s.size; ++c) v += s.weight[c] * values(static_cast<Eigen::Index>(s.index[c]), layer);
        return v;
    }
    Scalar operator()(const StateT<Scalar>& x, Eigen::Index layer = 0) const { return at(grid.locate(x), layer); }

    /// Per-node max over layers minus min over layers.
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> spread() const {
        return values.rowwise().maxCoeff() - values.rowwise().minCoeff();
    }
};
using GridValueFunction = GridValueFunctionT<double>;

} // namespace pdmp
