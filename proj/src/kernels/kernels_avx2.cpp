// AVX2 kernel variants. Compile with: -mavx2

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace atlasfuse::kernels::detail {
namespace {

inline __m256i load16(const std::uint16_t* p) { return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p)); }
inline void store16(std::uint16_t* p, __m256i v) { _mm256_storeu_si256(reinterpret_cast<__m256i*>(p), v); }

// 16 u16 lanes of 0xFFFF/0x0000 packed down to 16 bytes of 1/0.
inline void store_bool16(std::uint8_t* out, __m256i lane_mask) {
  const __m256i ones = _mm256_srli_epi16(lane_mask, 15);
  const __m128i packed = _mm_packus_epi16(_mm256_castsi256_si128(ones), _mm256_extracti128_si256(ones, 1));
  _mm_storeu_si128(reinterpret_cast<__m128i*>(out), packed);
}

void accumulate_label_votes(const std::uint16_t* labels, const std::uint8_t* mask, std::uint16_t label,
                            std::uint16_t* counts, std::size_t n) {
  const __m256i target = _mm256_set1_epi16(static_cast<short>(label));
  const __m256i zero = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    __m256i hit = _mm256_cmpeq_epi16(load16(labels + i), target);
    if (mask != nullptr) {
      const __m256i m16 = _mm256_cvtepu8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(mask + i)));
      hit = _mm256_andnot_si256(_mm256_cmpeq_epi16(m16, zero), hit);
    }
    // hit lanes are -1, so subtracting adds one.
    store16(counts + i, _mm256_sub_epi16(load16(counts + i), hit));
  }
  for (; i < n; ++i) {
    const bool keep = labels[i] == label && (mask == nullptr || mask[i] != 0);
    counts[i] = static_cast<std::uint16_t>(counts[i] + keep);
  }
}

void accumulate_matches(const std::uint16_t* a, const std::uint16_t* b, std::uint16_t* counts, std::size_t n) {
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m256i hit = _mm256_cmpeq_epi16(load16(a + i), load16(b + i));
    store16(counts + i, _mm256_sub_epi16(load16(counts + i), hit));
  }
  for (; i < n; ++i) counts[i] = static_cast<std::uint16_t>(counts[i] + (a[i] == b[i]));
}

void update_argmax(const std::uint16_t* counts, std::uint16_t label, std::uint16_t* best_label,
                   std::uint16_t* best_count, std::size_t n) {
  const __m256i lab = _mm256_set1_epi16(static_cast<short>(label));
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m256i c = load16(counts + i);
    const __m256i b = load16(best_count + i);
    // Unsigned c > b  <=>  max(c, b) == c && c != b.
    const __m256i ge = _mm256_cmpeq_epi16(_mm256_max_epu16(c, b), c);
    const __m256i gt = _mm256_andnot_si256(_mm256_cmpeq_epi16(c, b), ge);
    store16(best_count + i, _mm256_blendv_epi8(b, c, gt));
    store16(best_label + i, _mm256_blendv_epi8(load16(best_label + i), lab, gt));
  }
  for (; i < n; ++i) {
    if (counts[i] > best_count[i]) {
      best_count[i] = counts[i];
      best_label[i] = label;
    }
  }
}

void equal_mask(const std::uint16_t* a, const std::uint16_t* b, std::uint8_t* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) store_bool16(out + i, _mm256_cmpeq_epi16(load16(a + i), load16(b + i)));
  for (; i < n; ++i) out[i] = a[i] == b[i];
}

void threshold(const float* values, float cut, std::uint8_t* out, std::size_t n) {
  const __m256 c = _mm256_set1_ps(cut);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m256i lo = _mm256_castps_si256(_mm256_cmp_ps(_mm256_loadu_ps(values + i), c, _CMP_NLT_UQ));
    const __m256i hi = _mm256_castps_si256(_mm256_cmp_ps(_mm256_loadu_ps(values + i + 8), c, _CMP_NLT_UQ));
    // 32-bit lanes -> 16-bit (packs keeps lane order within 128-bit halves) -> bytes.
    const __m256i w = _mm256_permute4x64_epi64(_mm256_packs_epi32(lo, hi), 0xD8);
    store_bool16(out + i, w);
  }
  for (; i < n; ++i) out[i] = values[i] < cut ? 0 : 1;
}

void label_indicator(const std::uint16_t* labels, std::uint16_t label, std::uint8_t* out, std::size_t n) {
  const __m256i target = _mm256_set1_epi16(static_cast<short>(label));
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) store_bool16(out + i, _mm256_cmpeq_epi16(load16(labels + i), target));
  for (; i < n; ++i) out[i] = labels[i] == label;
}

void accumulate_rater_log_terms(const std::uint8_t* decisions, double log_p, double log_1mp, double log_q,
                                double log_1mq, double* log_a, double* log_b, std::size_t n) {
  const __m256d vp = _mm256_set1_pd(log_p), v1mp = _mm256_set1_pd(log_1mp);
  const __m256d vq = _mm256_set1_pd(log_q), v1mq = _mm256_set1_pd(log_1mq);
  const __m256i zero = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    int packed;
    __builtin_memcpy(&packed, decisions + i, 4);
    const __m256i d64 = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(packed));
    const __m256d off = _mm256_castsi256_pd(_mm256_cmpeq_epi64(d64, zero));
    const __m256d ta = _mm256_blendv_pd(vp, v1mp, off);
    const __m256d tb = _mm256_blendv_pd(v1mq, vq, off);
    _mm256_storeu_pd(log_a + i, _mm256_add_pd(_mm256_loadu_pd(log_a + i), ta));
    _mm256_storeu_pd(log_b + i, _mm256_add_pd(_mm256_loadu_pd(log_b + i), tb));
  }
  for (; i < n; ++i) {
    const bool d = decisions[i] != 0;
    log_a[i] += d ? log_p : log_1mp;
    log_b[i] += d ? log_1mq : log_q;
  }
}

}  // namespace

const KernelTable& avx2_table() noexcept {
  static const KernelTable table{
      "avx2",          accumulate_label_votes, accumulate_matches,        update_argmax, equal_mask, threshold,
      label_indicator, accumulate_rater_log_terms,
  };
  return table;
}

}  // namespace atlasfuse::kernels::detail
