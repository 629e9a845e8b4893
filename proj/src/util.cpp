#include "curvens/error.hpp"
#include "curvens/parallel.hpp"
#include "curvens/rng.hpp"

#include <atomic>
#include <exception>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

namespace curvens {

namespace {

std::mutex warn_mutex;
std::atomic<bool> warnings_enabled{ true };

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

void warn(std::string_view message) {
    if (!warnings_enabled.load()) {
        return;
    }
    std::lock_guard<std::mutex> lock(warn_mutex);
    std::cerr << "warning: " << message << '\n';
}

QuietWarnings::QuietWarnings() : previous_(warnings_enabled.exchange(false)) {}

QuietWarnings::~QuietWarnings() { warnings_enabled.store(previous_); }

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key, std::uint64_t index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ fnv1a64(key));
    return splitmix64(h ^ splitmix64(index + 0x51ed270b27ULL));
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = ~std::uint64_t{ 0 } - (~std::uint64_t{ 0 } % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)> & body) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
    std::atomic<std::size_t> next{ 0 };
    std::vector<std::exception_ptr> errors(count);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto & e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace curvens
