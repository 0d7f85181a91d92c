#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "adaspmv/types.hpp"

namespace adaspmv {

// Fixed-size worker pool. One job runs at a time; concurrent callers
// serialize on the job mutex. The calling thread participates in the job,
// so even a pool resized to a single thread makes progress.
class ThreadPool {
public:
    explicit ThreadPool(int workers) { start(workers < 1 ? 1 : workers); }

    ~ThreadPool() { stop(); }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int worker_count() const { return static_cast<int>(threads_.size()); }

    // Runs fn(task) for every task in [0, tasks); blocks until all complete.
    // Task ids determine the work split, so results do not depend on which
    // thread executes which task.
    void run(int tasks, const std::function<void(int)>& fn) {
        if (tasks <= 0) return;
        if (tasks == 1 || threads_.empty()) {
            for (int t = 0; t < tasks; ++t) fn(t);
            return;
        }
        std::unique_lock<std::mutex> job_lock(job_mutex_);
        auto job = std::make_shared<Job>();
        job->fn = &fn;
        job->tasks = tasks;
        {
            std::lock_guard<std::mutex> lk(m_);
            job_ = job;
            ++generation_;
        }
        cv_.notify_all();
        execute(*job);  // caller claims tasks too
        {
            std::unique_lock<std::mutex> lk(m_);
            done_cv_.wait(lk, [&] { return job->done.load(std::memory_order_acquire) == tasks; });
            job_.reset();
        }
        if (job->error) std::rethrow_exception(job->error);
    }

    // Joins and respawns the workers. Must not be called while a job runs.
    void resize(int workers) {
        std::unique_lock<std::mutex> job_lock(job_mutex_);
        stop();
        start(workers < 1 ? 1 : workers);
    }

    static ThreadPool& global() {
        static ThreadPool pool(default_workers());
        return pool;
    }

    static void set_global_workers(int workers) { global().resize(workers); }

    static int default_workers() {
        if (const char* env = std::getenv("ADASPMV_THREADS")) {
            int w = std::atoi(env);
            if (w > 0) return w;
        }
        unsigned hc = std::thread::hardware_concurrency();
        return hc == 0 ? 1 : static_cast<int>(hc);
    }

private:
    struct Job {
        const std::function<void(int)>* fn = nullptr;
        int tasks = 0;
        std::atomic<int> next{0};
        std::atomic<int> done{0};
        std::mutex error_m;
        std::exception_ptr error;
    };

    void start(int workers) {
        stop_ = false;
        threads_.reserve(static_cast<size_t>(workers));
        for (int i = 0; i < workers; ++i) {
            threads_.emplace_back([this] {
                std::uint64_t seen = 0;
                for (;;) {
                    std::shared_ptr<Job> job;
                    {
                        std::unique_lock<std::mutex> lk(m_);
                        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                        if (stop_) return;
                        seen = generation_;
                        job = job_;
                    }
                    if (job) execute(*job);
                }
            });
        }
    }

    void stop() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
        threads_.clear();
        stop_ = false;
    }

    void execute(Job& job) {
        for (;;) {
            int t = job.next.fetch_add(1, std::memory_order_relaxed);
            if (t >= job.tasks) return;
            try {
                (*job.fn)(t);
            } catch (...) {
                std::lock_guard<std::mutex> lk(job.error_m);
                if (!job.error) job.error = std::current_exception();
            }
            if (job.done.fetch_add(1, std::memory_order_acq_rel) + 1 == job.tasks) {
                std::lock_guard<std::mutex> lk(m_);
                done_cv_.notify_all();
            }
        }
    }

    std::vector<std::thread> threads_;
    std::mutex job_mutex_;  // serializes whole jobs
    std::mutex m_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::shared_ptr<Job> job_;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

// Half-open slice c of [0, n) split into `chunks` near-equal parts.
inline std::pair<index_t, index_t> chunk_range(index_t n, int chunks, int c) {
    index_t lo = n * c / chunks;
    index_t hi = n * (c + 1) / chunks;
    return {lo, hi};
}

// Below this many elements the deterministic multi-worker primitives
// (reduction, compaction) fall back to a single pass on the caller.
inline constexpr index_t kParallelGrain = 4096;

// Deterministic blocked reduction: per-chunk partials are combined on the
// caller in chunk order, so the result does not depend on scheduling.
template <class T, class ChunkFn, class CombineFn>
T parallel_reduce(index_t n, T init, ChunkFn&& chunk_fn, CombineFn&& combine) {
    ThreadPool& pool = ThreadPool::global();
    int chunks = pool.worker_count();
    if (n < kParallelGrain || chunks <= 1) {
        return chunk_fn(init, index_t{0}, n);
    }
    std::vector<T> partials(static_cast<size_t>(chunks), init);
    pool.run(chunks, [&](int c) {
        auto [lo, hi] = chunk_range(n, chunks, c);
        partials[static_cast<size_t>(c)] = chunk_fn(init, lo, hi);
    });
    T acc = init;
    for (const T& p : partials) acc = combine(acc, p);
    return acc;
}

} // namespace adaspmv
