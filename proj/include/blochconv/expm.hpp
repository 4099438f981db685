#pragma once

// Matrix exponential by scaling and squaring with diagonal Pade approximants
// of degree 3, 5, 7, 9 or 13 (Higham's 2005 selection thresholds). The
// degree is picked from the 1-norm so the backward error stays at unit
// roundoff; Bloch blocks of non-normal operators are handled the same way.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>

namespace blochconv {

namespace detail {

template <class Matrix>
Matrix pade_low(const Matrix& A, const double* b, int degree) {
    using Scalar = typename Matrix::Scalar;
    const Eigen::Index n = A.rows();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix A2 = A * A;
    Matrix power = I;
    Matrix U = Scalar(b[1]) * I;
    Matrix V = Scalar(b[0]) * I;
    for (int k = 2; k <= degree; k += 2) {
        power = power * A2;
        V += Scalar(b[k]) * power;
        U += Scalar(b[k + 1]) * power;
    }
    U = A * U;
    return (V - U).partialPivLu().solve(V + U);
}

template <class Matrix>
Matrix pade13(const Matrix& A) {
    using Scalar = typename Matrix::Scalar;
    static constexpr std::array<double, 14> b = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0, 129060195264000.0,
        10559470521600.0,    670442572800.0,      33522128640.0,      1323241920.0,       40840800.0,
        960960.0,            16380.0,             182.0,              1.0};
    const Eigen::Index n = A.rows();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix A2 = A * A;
    const Matrix A4 = A2 * A2;
    const Matrix A6 = A4 * A2;
    Matrix inner = Scalar(b[13]) * A6 + Scalar(b[11]) * A4 + Scalar(b[9]) * A2;
    Matrix U = A6 * inner + Scalar(b[7]) * A6 + Scalar(b[5]) * A4 + Scalar(b[3]) * A2 + Scalar(b[1]) * I;
    U = A * U;
    inner = Scalar(b[12]) * A6 + Scalar(b[10]) * A4 + Scalar(b[8]) * A2;
    Matrix V = A6 * inner + Scalar(b[6]) * A6 + Scalar(b[4]) * A4 + Scalar(b[2]) * A2 + Scalar(b[0]) * I;
    return (V - U).partialPivLu().solve(V + U);
}

} // namespace detail

/// exp(A) for a dense square Eigen matrix.
template <class Matrix>
Matrix expm(const Matrix& A) {
    static constexpr double b3[] = {120.0, 60.0, 12.0, 1.0};
    static constexpr double b5[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
    static constexpr double b7[] = {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0};
    static constexpr double b9[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                    2162160.0,     110880.0,     3960.0,       90.0,        1.0};
    static constexpr double theta3 = 1.495585217958292e-2;
    static constexpr double theta5 = 2.539398330063230e-1;
    static constexpr double theta7 = 9.504178996162932e-1;
    static constexpr double theta9 = 2.097847961257068e0;
    static constexpr double theta13 = 5.371920351148152e0;

    const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
    if (!std::isfinite(norm1))
        return Matrix::Constant(A.rows(), A.cols(), std::numeric_limits<double>::quiet_NaN());
    if (norm1 <= theta3)
        return detail::pade_low(A, b3, 3);
    if (norm1 <= theta5)
        return detail::pade_low(A, b5, 5);
    if (norm1 <= theta7)
        return detail::pade_low(A, b7, 7);
    if (norm1 <= theta9)
        return detail::pade_low(A, b9, 9);

    int squarings = 0;
    if (norm1 > theta13)
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    const Matrix scaled = A * typename Matrix::Scalar(std::ldexp(1.0, -squarings));
    Matrix result = detail::pade13(scaled);
    for (int k = 0; k < squarings; ++k)
        result = result * result;
    return result;
}

} // namespace blochconv
