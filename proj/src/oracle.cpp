#include "speedsim/oracle.hpp"

#include <string>

namespace speedsim {

namespace {

void check_positive(int v, const char* what) {
    if (v < 1) throw ConfigError(std::string(what) + " must be >= 1, got " + std::to_string(v));
}

// Shared inner loop: accumulate one output position for one output channel.
// Wrapping is modeled by doing the sums in uint32.
inline uint32_t conv_point(const ConvShape& s, const int32_t* x, const int32_t* w, int oc,
                           int oy, int ox) {
    const int ohs = oy * s.stride - s.pad;
    const int ows = ox * s.stride - s.pad;
    uint32_t acc = 0;
    if (s.depthwise) {
        const int c = oc;  // one input channel feeds one output channel
        for (int ky = 0; ky < s.kh; ++ky) {
            const int iy = ohs + ky;
            if (iy < 0 || iy >= s.ih) continue;
            for (int kx = 0; kx < s.kw; ++kx) {
                const int ix = ows + kx;
                if (ix < 0 || ix >= s.iw) continue;
                int32_t xv = x[(static_cast<size_t>(c) * s.ih + iy) * s.iw + ix];
                int32_t wv = w[(static_cast<size_t>(c) * s.kh + ky) * s.kw + kx];
                acc += static_cast<uint32_t>(static_cast<int64_t>(xv) * wv);
            }
        }
        return acc;
    }
    for (int c = 0; c < s.ic; ++c)
        for (int ky = 0; ky < s.kh; ++ky) {
            const int iy = ohs + ky;
            if (iy < 0 || iy >= s.ih) continue;
            for (int kx = 0; kx < s.kw; ++kx) {
                const int ix = ows + kx;
                if (ix < 0 || ix >= s.iw) continue;
                int32_t xv = x[(static_cast<size_t>(c) * s.ih + iy) * s.iw + ix];
                int32_t wv = w[((static_cast<size_t>(c) * s.kh + ky) * s.kw + kx) * s.oc + oc];
                acc += static_cast<uint32_t>(static_cast<int64_t>(xv) * wv);
            }
        }
    return acc;
}

}  // namespace

void ConvShape::validate() const {
    check_positive(ic, "ic");
    check_positive(ih, "ih");
    check_positive(iw, "iw");
    check_positive(oc, "oc");
    check_positive(kh, "kh");
    check_positive(kw, "kw");
    check_positive(stride, "stride");
    if (pad < 0) throw ConfigError("pad must be >= 0");
    if (depthwise && oc != ic) throw ConfigError("depthwise requires oc == ic");
    if (kh > ih + 2 * pad || kw > iw + 2 * pad)
        throw ConfigError("kernel larger than padded input");
    if (pad >= kh || pad >= kw)
        throw ConfigError("pad must be smaller than the kernel");
}

void MmShape::validate() const {
    check_positive(m, "m");
    check_positive(k, "k");
    check_positive(n, "n");
}

void conv2d_ref(const ConvShape& s, const int32_t* x, const int32_t* w, int32_t* y) {
    s.validate();
    const int oh = s.oh(), ow = s.ow();
    for (int oc = 0; oc < s.oc; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                y[(static_cast<size_t>(oc) * oh + oy) * ow + ox] =
                    static_cast<int32_t>(conv_point(s, x, w, oc, oy, ox));
}

void conv2d_omp(const ConvShape& s, const int32_t* x, const int32_t* w, int32_t* y) {
    s.validate();
    const int oh = s.oh(), ow = s.ow();
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.oc; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                y[(static_cast<size_t>(oc) * oh + oy) * ow + ox] =
                    static_cast<int32_t>(conv_point(s, x, w, oc, oy, ox));
}

void conv2d_im2col(const ConvShape& s, const int32_t* x, const int32_t* w, int32_t* y) {
    s.validate();
    const int oh = s.oh(), ow = s.ow();
    const size_t positions = static_cast<size_t>(oh) * ow;

    if (s.depthwise) {
        // Per-channel single-filter matmul.
        const size_t taps = static_cast<size_t>(s.kh) * s.kw;
        std::vector<int32_t> cols(taps * positions);
        std::vector<int32_t> out(positions);
        for (int c = 0; c < s.ic; ++c) {
            cols.assign(cols.size(), 0);
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    for (int ky = 0; ky < s.kh; ++ky)
                        for (int kx = 0; kx < s.kw; ++kx) {
                            int iy = oy * s.stride - s.pad + ky;
                            int ix = ox * s.stride - s.pad + kx;
                            if (iy < 0 || iy >= s.ih || ix < 0 || ix >= s.iw) continue;
                            cols[(static_cast<size_t>(ky) * s.kw + kx) * positions +
                                 static_cast<size_t>(oy) * ow + ox] =
                                x[(static_cast<size_t>(c) * s.ih + iy) * s.iw + ix];
                        }
            MmShape mm{1, static_cast<int>(taps), static_cast<int>(positions)};
            matmul_ref(mm, w + static_cast<size_t>(c) * taps, cols.data(), out.data());
            for (size_t i = 0; i < positions; ++i)
                y[static_cast<size_t>(c) * positions + i] = out[i];
        }
        return;
    }

    // Rows of the im2col matrix are (ic, ky, kx) taps; weights transpose to
    // [oc][ic*kh*kw] so the product is [oc][positions] = y directly.
    const size_t taps = static_cast<size_t>(s.ic) * s.kh * s.kw;
    std::vector<int32_t> cols(taps * positions, 0);
    for (int c = 0; c < s.ic; ++c)
        for (int ky = 0; ky < s.kh; ++ky)
            for (int kx = 0; kx < s.kw; ++kx) {
                size_t row = (static_cast<size_t>(c) * s.kh + ky) * s.kw + kx;
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        int iy = oy * s.stride - s.pad + ky;
                        int ix = ox * s.stride - s.pad + kx;
                        if (iy < 0 || iy >= s.ih || ix < 0 || ix >= s.iw) continue;
                        cols[row * positions + static_cast<size_t>(oy) * ow + ox] =
                            x[(static_cast<size_t>(c) * s.ih + iy) * s.iw + ix];
                    }
            }
    std::vector<int32_t> wt(static_cast<size_t>(s.oc) * taps);
    for (size_t t = 0; t < taps; ++t)
        for (int oc = 0; oc < s.oc; ++oc)
            wt[static_cast<size_t>(oc) * taps + t] = w[t * s.oc + oc];
    MmShape mm{s.oc, static_cast<int>(taps), static_cast<int>(positions)};
    matmul_ref(mm, wt.data(), cols.data(), y);
}

void matmul_ref(const MmShape& s, const int32_t* a, const int32_t* b, int32_t* y) {
    s.validate();
    for (int i = 0; i < s.m; ++i)
        for (int j = 0; j < s.n; ++j) {
            uint32_t acc = 0;
            for (int t = 0; t < s.k; ++t)
                acc += static_cast<uint32_t>(
                    static_cast<int64_t>(a[static_cast<size_t>(i) * s.k + t]) *
                    b[static_cast<size_t>(t) * s.n + j]);
            y[static_cast<size_t>(i) * s.n + j] = static_cast<int32_t>(acc);
        }
}

void matmul_omp(const MmShape& s, const int32_t* a, const int32_t* b, int32_t* y) {
    s.validate();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < s.m; ++i)
        for (int j = 0; j < s.n; ++j) {
            uint32_t acc = 0;
            for (int t = 0; t < s.k; ++t)
                acc += static_cast<uint32_t>(
                    static_cast<int64_t>(a[static_cast<size_t>(i) * s.k + t]) *
                    b[static_cast<size_t>(t) * s.n + j]);
            y[static_cast<size_t>(i) * s.n + j] = static_cast<int32_t>(acc);
        }
}

void matmul_kouter(const MmShape& s, const int32_t* a, const int32_t* b, int32_t* y) {
    s.validate();
    std::vector<uint32_t> acc(s.y_elems(), 0);
    for (int t = 0; t < s.k; ++t)
        for (int i = 0; i < s.m; ++i) {
            const int64_t av = a[static_cast<size_t>(i) * s.k + t];
            for (int j = 0; j < s.n; ++j)
                acc[static_cast<size_t>(i) * s.n + j] +=
                    static_cast<uint32_t>(av * b[static_cast<size_t>(t) * s.n + j]);
        }
    for (size_t i = 0; i < acc.size(); ++i) y[i] = static_cast<int32_t>(acc[i]);
}

uint64_t conv_macs(const ConvShape& s) {
    s.validate();
    const int oh = s.oh(), ow = s.ow();
    // Count valid taps once per output position; channels multiply uniformly.
    uint64_t taps = 0;
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int ky = 0; ky < s.kh; ++ky) {
                int iy = oy * s.stride - s.pad + ky;
                if (iy < 0 || iy >= s.ih) continue;
                for (int kx = 0; kx < s.kw; ++kx) {
                    int ix = ox * s.stride - s.pad + kx;
                    if (ix >= 0 && ix < s.iw) ++taps;
                }
            }
    // Depthwise: each channel multiplies only its own filter. Dense: every
    // tap feeds every (ic, oc) pair.
    return taps * (s.depthwise ? static_cast<uint64_t>(s.ic)
                               : static_cast<uint64_t>(s.ic) * s.oc);
}

uint64_t mm_macs(const MmShape& s) {
    s.validate();
    return static_cast<uint64_t>(s.m) * s.k * s.n;
}

}  // namespace speedsim
