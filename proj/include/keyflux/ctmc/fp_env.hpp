#pragma once

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define KEYFLUX_HAS_MXCSR 1
#endif

namespace keyflux {

/// Flushes subnormal results and operands to zero while alive. Probability
/// tails far from the bulk underflow into the subnormal range, where x86
/// arithmetic is an order of magnitude slower; their contribution is below
/// any tolerance the solvers honor.
class FlushSubnormals {
 public:
  FlushSubnormals() {
#ifdef KEYFLUX_HAS_MXCSR
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040u);  // FTZ | DAZ
#endif
  }
  ~FlushSubnormals() {
#ifdef KEYFLUX_HAS_MXCSR
    _mm_setcsr(saved_);
#endif
  }
  FlushSubnormals(const FlushSubnormals&) = delete;
  FlushSubnormals& operator=(const FlushSubnormals&) = delete;

 private:
  unsigned int saved_ = 0;
};

}  // namespace keyflux
