#include "kernels_impl.hpp"

namespace atlasfuse::kernels {
namespace {

void accumulate_label_votes(const std::uint16_t* labels, const std::uint8_t* mask, std::uint16_t label,
                            std::uint16_t* counts, std::size_t n) {
  if (mask == nullptr) {
    for (std::size_t i = 0; i < n; ++i) counts[i] = static_cast<std::uint16_t>(counts[i] + (labels[i] == label));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      counts[i] = static_cast<std::uint16_t>(counts[i] + (labels[i] == label && mask[i] != 0));
    }
  }
}

void accumulate_matches(const std::uint16_t* a, const std::uint16_t* b, std::uint16_t* counts, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) counts[i] = static_cast<std::uint16_t>(counts[i] + (a[i] == b[i]));
}

void update_argmax(const std::uint16_t* counts, std::uint16_t label, std::uint16_t* best_label,
                   std::uint16_t* best_count, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] > best_count[i]) {
      best_count[i] = counts[i];
      best_label[i] = label;
    }
  }
}

void equal_mask(const std::uint16_t* a, const std::uint16_t* b, std::uint8_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] == b[i];
}

void threshold(const float* values, float cut, std::uint8_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = values[i] < cut ? 0 : 1;
}

void label_indicator(const std::uint16_t* labels, std::uint16_t label, std::uint8_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = labels[i] == label;
}

void accumulate_rater_log_terms(const std::uint8_t* decisions, double log_p, double log_1mp, double log_q,
                                double log_1mq, double* log_a, double* log_b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const bool d = decisions[i] != 0;
    log_a[i] += d ? log_p : log_1mp;
    log_b[i] += d ? log_1mq : log_q;
  }
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{
      "scalar",       accumulate_label_votes, accumulate_matches,        update_argmax, equal_mask, threshold,
      label_indicator, accumulate_rater_log_terms,
  };
  return table;
}

}  // namespace atlasfuse::kernels
