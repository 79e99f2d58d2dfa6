#pragma once

#include <cmath>
#include <concepts>

namespace gnnhls {

enum class Activation { relu, elu, leaky_relu, sigmoid, tanh };

template <std::floating_point T>
T relu(T x) noexcept {
  return x > T(0) ? x : T(0);
}

// alpha = 1
template <std::floating_point T>
T elu(T x) noexcept {
  return x > T(0) ? x : std::expm1(x);
}

template <std::floating_point T>
T leaky_relu(T x, T slope) noexcept {
  return x > T(0) ? x : slope * x;
}

template <std::floating_point T>
T sigmoid(T x) noexcept {
  // Split on sign so exp never overflows.
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

inline float activate(Activation kind, float x, float slope = 0.2f) noexcept {
  switch (kind) {
    case Activation::relu: return relu(x);
    case Activation::elu: return elu(x);
    case Activation::leaky_relu: return leaky_relu(x, slope);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return std::tanh(x);
  }
  return x;
}

}  // namespace gnnhls
