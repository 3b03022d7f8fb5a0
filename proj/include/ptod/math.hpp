#pragma once
// Embedding-space math. Eigen is the only math dependency; the helpers
// are free functions over Eigen expressions so callers can pass blocks,
// maps, or sums without materializing temporaries.

#include <Eigen/Dense>

#include <stdexcept>

namespace ptod {

using Vec = Eigen::VectorXd;

template <typename A, typename B>
double euclidean_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("euclidean_distance: dimension mismatch");
    return (a.derived() - b.derived()).norm();
}

// Cosine similarity; zero vectors have similarity 0 with everything.
template <typename A, typename B>
double cosine_similarity(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    double na = a.derived().norm();
    double nb = b.derived().norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.derived().dot(b.derived()) / (na * nb);
}

}  // namespace ptod
