#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace fpscan {

/// Counted, non-fatal warnings collected while processing data.
class Diagnostics {
public:
    static constexpr std::size_t kMaxMessages = 64;

    void warn(const std::string& code, std::string message = {});
    std::size_t count(const std::string& code) const;
    std::size_t total() const noexcept { return total_; }
    const std::map<std::string, std::size_t>& counts() const noexcept { return counts_; }
    /// First kMaxMessages messages, in arrival order.
    const std::vector<std::string>& messages() const noexcept { return messages_; }
    void merge(const Diagnostics& other);

private:
    std::map<std::string, std::size_t> counts_;
    std::vector<std::string> messages_;
    std::size_t total_ = 0;
};

}  // namespace fpscan
