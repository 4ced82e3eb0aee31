#pragma once

#include "lpm/types.hpp"

namespace lpm {

bool is_pow2(std::size_t n);

/// Unitary DFT, in place. Forward kernel e^{-i 2pi kn/T}, scaled by
/// 1/sqrt(T) in both directions so forward and inverse are adjoint.
/// Radix-2 FFT for power-of-two lengths, direct O(T^2) evaluation otherwise.
void dft_inplace(ComplexVec& z, bool inverse = false);

ComplexVec dft(const ComplexVec& z);
ComplexVec idft(const ComplexVec& z);

}  // namespace lpm
