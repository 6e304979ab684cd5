#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace reactordb {

using ContainerId = uint32_t;
using ExecutorId = uint32_t;
using TableId = uint32_t;
using LeafId = uint64_t;

// Composite row key: at most two 64-bit components, lexicographic order.
struct Key {
    int64_t hi = 0;
    int64_t lo = 0;

    constexpr Key() = default;
    constexpr explicit Key(int64_t a) : hi(a), lo(0) {}
    constexpr Key(int64_t a, int64_t b) : hi(a), lo(b) {}

    auto operator<=>(const Key&) const = default;

    static constexpr Key min() {
        return Key(INT64_MIN, INT64_MIN);
    }
    static constexpr Key max() {
        return Key(INT64_MAX, INT64_MAX);
    }

    std::string str() const {
        return "(" + std::to_string(hi) + "," + std::to_string(lo) + ")";
    }
};

// Fixed-capacity flat record payload. Every table fixes its record size at
// creation; there are no variable-length values.
class Value {
public:
    static constexpr size_t kCapacity = 48;

    Value() = default;

    Value(const void* data, size_t n) {
        assign(data, n);
    }

    void assign(const void* data, size_t n) {
        if (n > kCapacity)
            throw std::length_error("record value exceeds fixed capacity");
        size_ = static_cast<uint32_t>(n);
        std::memcpy(buf_.data(), data, n);
        if (n < kCapacity)
            std::memset(buf_.data() + n, 0, kCapacity - n);
    }

    const std::byte* data() const { return buf_.data(); }
    std::byte* data() { return buf_.data(); }
    size_t size() const { return size_; }

    template <typename T>
    static Value of(const T& row) {
        static_assert(std::is_trivially_copyable_v<T> && sizeof(T) <= kCapacity);
        return Value(&row, sizeof(T));
    }

    template <typename T>
    T as() const {
        static_assert(std::is_trivially_copyable_v<T> && sizeof(T) <= kCapacity);
        T row;
        std::memcpy(&row, buf_.data(), sizeof(T));
        return row;
    }

    bool operator==(const Value& o) const {
        return size_ == o.size_ && std::memcmp(buf_.data(), o.buf_.data(), size_) == 0;
    }

private:
    std::array<std::byte, kCapacity> buf_{};
    uint32_t size_ = 0;
};

// Flat argument/result bundles passed through reactor function invocations.
// Everything is value-typed so tasks can move between threads.
using ArgValue = std::variant<int64_t, double, std::string,
                              std::vector<int64_t>, std::vector<double>>;
using ArgPack = std::vector<ArgValue>;

// Outcome of the commit protocol for a root transaction.
struct CommitOutcome {
    bool committed = false;
    std::optional<uint64_t> commit_tid;
    std::vector<ContainerId> containers_spanned;
    double commit_micros = 0.0;
};

// Invalid deployment / workload / schema configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// API misuse (e.g. install without holding the record lock).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Application-level transaction failure; maps to the abort path.
class TxnFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace reactordb
