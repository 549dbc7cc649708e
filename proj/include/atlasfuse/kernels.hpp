#pragma once

// Element-wise inner loops shared by the voting, mask and EM code.
//
// Every kernel has a scalar reference implementation and, where the build and
// CPU allow it, an AVX2 variant. Variants must produce bit-identical output to
// the scalar reference: they only perform integer ops, comparisons, selects and
// independent per-element additions (no horizontal reductions).

#include <cstddef>
#include <cstdint>

namespace atlasfuse::kernels {

struct KernelTable {
  const char* name;

  // counts[i] += (labels[i] == label && (mask == nullptr || mask[i] != 0))
  void (*accumulate_label_votes)(const std::uint16_t* labels, const std::uint8_t* mask, std::uint16_t label,
                                 std::uint16_t* counts, std::size_t n);

  // counts[i] += (a[i] == b[i])
  void (*accumulate_matches)(const std::uint16_t* a, const std::uint16_t* b, std::uint16_t* counts, std::size_t n);

  // if counts[i] > best_count[i]: best_count[i] = counts[i], best_label[i] = label
  void (*update_argmax)(const std::uint16_t* counts, std::uint16_t label, std::uint16_t* best_label,
                        std::uint16_t* best_count, std::size_t n);

  // out[i] = (a[i] == b[i])
  void (*equal_mask)(const std::uint16_t* a, const std::uint16_t* b, std::uint8_t* out, std::size_t n);

  // out[i] = (values[i] < cut) ? 0 : 1
  void (*threshold)(const float* values, float cut, std::uint8_t* out, std::size_t n);

  // out[i] = (labels[i] == label)
  void (*label_indicator)(const std::uint16_t* labels, std::uint16_t label, std::uint8_t* out, std::size_t n);

  // log_a[i] += d[i] ? log_p : log_1mp;  log_b[i] += d[i] ? log_1mq : log_q
  void (*accumulate_rater_log_terms)(const std::uint8_t* decisions, double log_p, double log_1mp, double log_q,
                                     double log_1mq, double* log_a, double* log_b, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;

/// AVX2 table, or nullptr when it was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels() noexcept;

/// Table used by the library. Picks AVX2 when available unless
/// ATLASFUSE_SIMD=scalar is set in the environment (read once).
const KernelTable& active() noexcept;

}  // namespace atlasfuse::kernels
