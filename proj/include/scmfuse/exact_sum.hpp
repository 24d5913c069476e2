#ifndef SCMFUSE_EXACT_SUM_HPP
#define SCMFUSE_EXACT_SUM_HPP

#include <cmath>
#include <vector>

namespace scmfuse {

/// Error-free running sum of doubles (Shewchuk expansion, as in Python's
/// math.fsum). value() is the correctly rounded total, so the result does not
/// depend on the order or grouping of the additions.
class ExactSum {
public:
    void add(double x) {
        if (!std::isfinite(x)) {
            special_ += x;
            has_special_ = true;
            return;
        }
        std::size_t i = 0;
        for (double y : partials_) {
            if (std::abs(x) < std::abs(y)) std::swap(x, y);
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) partials_[i++] = lo;
            x = hi;
        }
        partials_.resize(i);
        partials_.push_back(x);
    }

    void add(const ExactSum& other) {
        for (double p : other.partials_) add(p);
        if (other.has_special_) {
            special_ += other.special_;
            has_special_ = true;
        }
    }

    ExactSum& operator+=(double x) {
        add(x);
        return *this;
    }

    double value() const {
        if (has_special_) return special_;
        std::size_t n = partials_.size();
        if (n == 0) return 0.0;
        double hi = partials_[--n];
        double lo = 0.0;
        while (n > 0) {
            const double x = hi;
            const double y = partials_[--n];
            hi = x + y;
            const double yr = hi - x;
            lo = y - yr;
            if (lo != 0.0) break;
        }
        if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
            const double y = lo * 2.0;
            const double x = hi + y;
            if (y == x - hi) hi = x;
        }
        return hi;
    }

private:
    std::vector<double> partials_;
    double special_ = 0.0;
    bool has_special_ = false;
};

}  // namespace scmfuse

#endif  // SCMFUSE_EXACT_SUM_HPP
