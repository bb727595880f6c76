#pragma once
// Exception taxonomy; each failure class is catchable on its own.

#include <stdexcept>
#include <string>

namespace terratwin {

// Invalid parameter or precondition violation.
struct argument_error : std::invalid_argument {
    explicit argument_error(const std::string& what) : std::invalid_argument(what) {}
};

// Dimension mismatch between grids/tensors.
struct shape_error : std::invalid_argument {
    explicit shape_error(const std::string& what) : std::invalid_argument(what) {}
};

// A range or class collapsed to a single value (constant height field,
// single-class ROC truth, ...).
struct degenerate_error : std::runtime_error {
    explicit degenerate_error(const std::string& what) : std::runtime_error(what) {}
};

// Rejection sampling ran out of attempts.
struct exhaustion_error : std::runtime_error {
    explicit exhaustion_error(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss during training; message names epoch and step.
struct divergence_error : std::runtime_error {
    explicit divergence_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed text or image input; carries the byte offset (or line number)
// where parsing stopped.
struct parse_error : std::runtime_error {
    parse_error(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// A pixel color that is not in the palette being decoded.
struct decode_error : std::runtime_error {
    explicit decode_error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem-level failure.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint load failures, one type per condition.
struct checkpoint_error : std::runtime_error {
    explicit checkpoint_error(const std::string& what) : std::runtime_error(what) {}
};
struct bad_magic_error : checkpoint_error {
    explicit bad_magic_error(const std::string& what) : checkpoint_error(what) {}
};
struct version_error : checkpoint_error {
    explicit version_error(const std::string& what) : checkpoint_error(what) {}
};
struct truncation_error : checkpoint_error {
    explicit truncation_error(const std::string& what) : checkpoint_error(what) {}
};

} // namespace terratwin
