#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace labelmend {

enum class Errc {
  bad_magic,
  truncated_payload,
  non_finite_value,
  io_failure,
  bad_header,
  index_out_of_range,
  palette_size_mismatch,
  shape_mismatch,
  empty_relevant_set,
  non_positive_theta,
  missing_ground_truth,
  empty_candidate_grid,
  target_too_large,
  empty_image,
  empty_seed_set,
  diverged_loss,
  shape_out_of_canvas,
  config_error,
  usage_error,
};

const char* errc_name(Errc c);

// Single exception type for the whole library; `code` lets callers and
// tests dispatch without string matching. `offset` is the byte offset for
// file-format errors, npos otherwise.
class Error : public std::runtime_error {
public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Error(Errc code, std::string message, std::size_t offset = npos)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code),
        offset_(offset) {}

  Errc code() const noexcept { return code_; }
  std::size_t offset() const noexcept { return offset_; }

private:
  Errc code_;
  std::size_t offset_;
};

[[noreturn]] inline void raise(Errc code, std::string message,
                               std::size_t offset = Error::npos) {
  throw Error(code, std::move(message), offset);
}

}  // namespace labelmend
