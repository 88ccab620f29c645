#pragma once

#include <cstddef>
#include <vector>

#include "delaysync/matrix.hpp"

namespace delaysync {

enum class PrefillPolicy { zeros, hold_initial };

/// Integer-step FIFO channel for vector signals: push the current sample,
/// read the sample from `delay` steps ago. Before enough samples exist the
/// prefill policy decides what comes out (zero vectors, or the first sample).
class DelayLine {
public:
    DelayLine(std::size_t delay, std::size_t width,
              PrefillPolicy policy = PrefillPolicy::zeros)
        : delay_(delay), width_(width), policy_(policy),
          buffer_(delay, Vec(width, 1)) {}

    std::size_t delay() const { return delay_; }
    std::size_t width() const { return width_; }

    Vec push_and_read(const Vec& sample) {
        if (sample.rows() != width_ || sample.cols() != 1)
            throw DimensionError("DelayLine: sample width " + sample.shape_str() +
                                 " does not match line width " + std::to_string(width_));
        if (policy_ == PrefillPolicy::hold_initial && !primed_) {
            for (auto& slot : buffer_) slot = sample;
            primed_ = true;
        }
        if (delay_ == 0) return sample;
        Vec out = buffer_[head_];
        buffer_[head_] = sample;
        head_ = (head_ + 1) % delay_;
        return out;
    }

private:
    std::size_t delay_;
    std::size_t width_;
    PrefillPolicy policy_;
    std::vector<Vec> buffer_;
    std::size_t head_ = 0;
    bool primed_ = false;
};

} // namespace delaysync
