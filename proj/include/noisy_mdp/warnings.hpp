#pragma once

#include <functional>
#include <string>

namespace noisy_mdp {

using WarningHandler = std::function<void(const std::string&)>;

/// Installs a handler for the calling thread; returns the previous one.
/// An empty handler restores the default, which prints to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

/// RAII capture of warnings raised on this thread.
class ScopedWarningCapture {
public:
    explicit ScopedWarningCapture(std::function<void(const std::string&)> sink)
        : previous_(set_warning_handler(std::move(sink))) {}
    ~ScopedWarningCapture() { set_warning_handler(std::move(previous_)); }
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

private:
    WarningHandler previous_;
};

}  // namespace noisy_mdp
