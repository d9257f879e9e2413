#pragma once

#include <cstdint>
#include <vector>

#include "speedsim/errors.hpp"

namespace speedsim {

// Convolution operator shape. Tensors are dense row-major:
//   input   [ic][ih][iw]
//   weights [ic][kh][kw][oc]   (depthwise: [ic][kh][kw], one filter per channel)
//   output  [oc][oh][ow]       (depthwise: oc == ic)
struct ConvShape {
    int ic = 1;
    int ih = 1;
    int iw = 1;
    int oc = 1;
    int kh = 1;
    int kw = 1;
    int stride = 1;
    int pad = 0;
    bool depthwise = false;

    int oh() const { return (ih + 2 * pad - kh) / stride + 1; }
    int ow() const { return (iw + 2 * pad - kw) / stride + 1; }
    void validate() const;  // ConfigError on nonsense

    size_t input_elems() const { return static_cast<size_t>(ic) * ih * iw; }
    size_t weight_elems() const {
        return static_cast<size_t>(ic) * kh * kw * (depthwise ? 1 : oc);
    }
    size_t output_elems() const { return static_cast<size_t>(oc) * oh() * ow(); }
};

// Matrix multiply  y[m][n] = a[m][k] . b[k][n],  all row-major.
struct MmShape {
    int m = 1;
    int k = 1;
    int n = 1;

    void validate() const;

    size_t a_elems() const { return static_cast<size_t>(m) * k; }
    size_t b_elems() const { return static_cast<size_t>(k) * n; }
    size_t y_elems() const { return static_cast<size_t>(m) * n; }
};

// All reference kernels accumulate in 32-bit two's complement with wraparound,
// matching the PE array exactly. Padding taps are skipped, not multiplied by
// zero, and the mac counters below count exactly the multiplies performed.

void conv2d_ref(const ConvShape& s, const int32_t* x, const int32_t* w, int32_t* y);
void conv2d_omp(const ConvShape& s, const int32_t* x, const int32_t* w, int32_t* y);
// Independent route: explicit im2col matrix followed by a matrix multiply.
void conv2d_im2col(const ConvShape& s, const int32_t* x, const int32_t* w, int32_t* y);

void matmul_ref(const MmShape& s, const int32_t* a, const int32_t* b, int32_t* y);
void matmul_omp(const MmShape& s, const int32_t* a, const int32_t* b, int32_t* y);
// Independent route: k-outer accumulation order.
void matmul_kouter(const MmShape& s, const int32_t* a, const int32_t* b, int32_t* y);

// Exact number of multiply-accumulates the reference performs (padding taps
// excluded). valid operations = 2 * macs.
uint64_t conv_macs(const ConvShape& s);
uint64_t mm_macs(const MmShape& s);

}  // namespace speedsim
