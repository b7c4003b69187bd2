#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace ipw {

namespace detail {
inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> engine;  // caches twiddle tables per size
    return engine;
}
}  // namespace detail

/// Unscaled forward DFT: F_k = sum_j f_j exp(-2*pi*i*j*k/n).
inline Eigen::VectorXcd fft_forward(const Eigen::VectorXcd& v) {
    Eigen::VectorXcd out(v.size());
    detail::fft_engine().fwd(out, v);
    return out;
}

/// Inverse DFT including the 1/n factor.
inline Eigen::VectorXcd fft_inverse(const Eigen::VectorXcd& v) {
    Eigen::VectorXcd out(v.size());
    detail::fft_engine().inv(out, v);
    return out;
}

/// 2D DFT of a matrix, rows indexing the first axis. Forward is unscaled, the
/// inverse carries the full 1/(n1*n2).
inline void fft2_forward_inplace(Eigen::MatrixXcd& m) {
    auto& eng = detail::fft_engine();
    Eigen::VectorXcd in(m.rows()), out(m.rows());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        in = m.col(c);
        eng.fwd(out, in);
        m.col(c) = out;
    }
    Eigen::VectorXcd rin(m.cols()), rout(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        rin = m.row(r).transpose();
        eng.fwd(rout, rin);
        m.row(r) = rout.transpose();
    }
}

inline void fft2_inverse_inplace(Eigen::MatrixXcd& m) {
    auto& eng = detail::fft_engine();
    Eigen::VectorXcd in(m.rows()), out(m.rows());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        in = m.col(c);
        eng.inv(out, in);
        m.col(c) = out;
    }
    Eigen::VectorXcd rin(m.cols()), rout(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        rin = m.row(r).transpose();
        eng.inv(rout, rin);
        m.row(r) = rout.transpose();
    }
}

/// DFT of every row (transform along the second axis).
inline Eigen::MatrixXcd fft_rows(const Eigen::MatrixXcd& m) {
    Eigen::MatrixXcd out(m.rows(), m.cols());
    auto& eng = detail::fft_engine();
    Eigen::VectorXcd rin(m.cols()), rout(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        rin = m.row(r).transpose();
        eng.fwd(rout, rin);
        out.row(r) = rout.transpose();
    }
    return out;
}

/// DFT of every column (transform along the first axis).
inline Eigen::MatrixXcd fft_cols(const Eigen::MatrixXcd& m) {
    Eigen::MatrixXcd out(m.rows(), m.cols());
    auto& eng = detail::fft_engine();
    Eigen::VectorXcd in(m.rows()), cout_(m.rows());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        in = m.col(c);
        eng.fwd(cout_, in);
        out.col(c) = cout_;
    }
    return out;
}

}  // namespace ipw
