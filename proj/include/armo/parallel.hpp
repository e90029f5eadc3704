#pragma once

#include <exception>
#include <mutex>

namespace armo {

/// Carries the first exception thrown inside an OpenMP region out to the
/// calling thread. Exceptions must not cross the region boundary.
class ExceptionSlot {
public:
    template <typename Fn>
    void run(Fn&& fn) noexcept {
        try {
            fn();
        } catch (...) {
            std::lock_guard lock(mutex_);
            if (!error_) error_ = std::current_exception();
        }
    }

    void rethrow() const {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr error_;
};

}  // namespace armo
