#pragma once

#include <cstdint>
#include <sstream>
#include <string>

#include "rlda/error.hpp"

namespace rlda::nn {

// Shape hyperparameters of the CNN-LSTM Q-network. Kernel sizes, LSTM width,
// dense width, dropout and the 40x87 input are fixed by the model; filter
// counts are free and default to 32 / 64.
struct Architecture {
  int input_freq = 40;
  int input_time = 87;
  int conv1_filters = 32;
  int conv1_kernel = 5;
  int conv2_filters = 64;
  int conv2_kernel = 3;
  int lstm_units = 16;
  int dense_units = 256;
  double dropout = 0.3;
  int actions = 4;

  int lstm_input_dim() const { return input_freq * conv2_filters; }

  void validate() const {
    if (input_freq <= 0 || input_time <= 0 || conv1_filters <= 0 || conv2_filters <= 0 || lstm_units <= 0 ||
        dense_units <= 0 || actions <= 0)
      throw ValueError("architecture sizes must be positive");
    if (conv1_kernel % 2 == 0 || conv2_kernel % 2 == 0) throw ValueError("conv kernels must be odd");
    if (dropout < 0.0 || dropout >= 1.0) throw ValueError("dropout must be in [0, 1)");
  }

  // Canonical text form; also what the checkpoint header stores.
  std::string describe() const {
    std::ostringstream os;
    os << "input=" << input_freq << "x" << input_time << ";conv1=" << conv1_filters << "x" << conv1_kernel
       << ";bn;conv2=" << conv2_filters << "x" << conv2_kernel << ";lstm=" << lstm_units
       << ";dense=" << dense_units << ";dropout=" << dropout << ";out=" << actions;
    return os.str();
  }

  // FNV-1a over describe().
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : describe()) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    return h;
  }

  static Architecture parse(const std::string& text) {
    Architecture a;
    char sep = 0;
    std::istringstream is(text);
    auto expect = [&](const char* key) {
      std::string k;
      std::getline(is, k, '=');
      if (k != key) throw FormatError("architecture descriptor: expected '" + std::string(key) + "'");
    };
    expect("input");
    is >> a.input_freq >> sep >> a.input_time >> sep;
    expect("conv1");
    is >> a.conv1_filters >> sep >> a.conv1_kernel >> sep;
    std::string bn;
    std::getline(is, bn, ';');
    expect("conv2");
    is >> a.conv2_filters >> sep >> a.conv2_kernel >> sep;
    expect("lstm");
    is >> a.lstm_units >> sep;
    expect("dense");
    is >> a.dense_units >> sep;
    expect("dropout");
    is >> a.dropout >> sep;
    expect("out");
    is >> a.actions;
    if (!is || bn != "bn") throw FormatError("malformed architecture descriptor: " + text);
    a.validate();
    return a;
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

}  // namespace rlda::nn
