#include "evdeblur/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace evdeblur {

namespace {
std::atomic<unsigned> g_max_threads{0};

unsigned effective_threads() {
    unsigned cap = g_max_threads.load();
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return cap == 0 ? hw : std::min(cap, hw);
}
}  // namespace

void set_max_threads(unsigned n) { g_max_threads.store(n); }

unsigned max_threads() { return effective_threads(); }

void parallel_for(size_t begin, size_t end, const std::function<void(size_t, size_t)>& fn) {
    if (begin >= end) return;
    size_t total = end - begin;
    size_t workers = std::min<size_t>(effective_threads(), total);
    if (workers <= 1) {
        fn(begin, end);
        return;
    }

    // Contiguous blocks in index order; the first (total % workers) blocks
    // take one extra element. The split depends only on (total, workers).
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    size_t base = total / workers;
    size_t extra = total % workers;
    size_t cursor = begin;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        size_t len = base + (w < extra ? 1 : 0);
        size_t b = cursor;
        size_t e = cursor + len;
        cursor = e;
        pool.emplace_back([&fn, &errors, w, b, e]() {
            try {
                fn(b, e);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

}  // namespace evdeblur
