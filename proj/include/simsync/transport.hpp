#pragma once

// Emulated wireless channel: token-bucket rate limiting plus a fixed one-way
// delay, netem-style. In virtual-time mode every delivery instant is
// computed analytically against a caller-driven clock, which makes latency
// experiments deterministic and hardware-independent; in real-time mode the
// same schedule is enforced against the wall clock. The bucket starts empty,
// so a message sent into an idle channel drains at exactly rate_bits_per_s.

#include <algorithm>
#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "simsync/errors.hpp"

namespace simsync {

struct ChannelConfig {
  double rate_bits_per_s = 1e6;
  double latency_s = 0.05;        // one-way delay
  double bucket_bytes = 32768.0;  // burst allowance after idle periods
  std::size_t queue_depth = 128;  // bounded non-blocking enqueue window, in messages

  void validate() const {
    if (!(rate_bits_per_s > 0.0)) throw ConfigError("channel rate must be positive");
    if (latency_s < 0.0) throw ConfigError("channel latency must be non-negative");
    if (bucket_bytes < 0.0) throw ConfigError("bucket size must be non-negative");
    if (queue_depth == 0) throw ConfigError("queue depth must be at least 1");
  }
};

/// Caller-advanced clock for virtual-time sessions.
class VirtualClock {
 public:
  double now() const { return now_; }

  void advance(double dt) {
    if (dt < 0.0) throw ConfigError("clock cannot run backwards");
    now_ += dt;
  }

  void advance_to(double t) {
    if (t > now_) now_ = t;
  }

 private:
  double now_ = 0.0;
};

enum class MessageKind : std::uint8_t { Init = 0, Certify, FullUpdate, PartialUpdate, StreamState };

struct TransportStats {
  std::uint64_t bytes_sent = 0;
  std::array<std::uint64_t, 5> messages_sent{};  // per MessageKind

  std::uint64_t total_messages() const {
    std::uint64_t n = 0;
    for (auto c : messages_sent) n += c;
    return n;
  }
};

/// Fluid token-bucket schedule. Tokens accrue at rate/8 bytes per second up
/// to bucket_bytes; a message begins draining once all earlier messages have
/// finished (FIFO) and completes after its bytes are covered by the token
/// balance plus accrual. Delivery = drain completion + one-way latency.
class TokenBucketSchedule {
 public:
  explicit TokenBucketSchedule(const ChannelConfig& cfg)
      : rate_bytes_per_s_(cfg.rate_bits_per_s / 8.0), bucket_bytes_(cfg.bucket_bytes),
        latency_s_(cfg.latency_s) {}

  struct Timing {
    double enqueue = 0.0;        // admission instant (may exceed the request)
    double drain_finish = 0.0;   // last byte leaves the shaper
    double delivery = 0.0;       // last byte reaches the peer
  };

  Timing enqueue(double requested_time, std::size_t bytes, double admit_not_before = 0.0) {
    Timing t;
    t.enqueue = std::max(requested_time, admit_not_before);
    const double start = std::max(t.enqueue, last_finish_);
    tokens_ = std::min(bucket_bytes_, tokens_ + rate_bytes_per_s_ * (start - token_time_));
    token_time_ = start;
    const double size = static_cast<double>(bytes);
    if (tokens_ >= size) {
      tokens_ -= size;
      t.drain_finish = start;
    } else {
      t.drain_finish = start + (size - tokens_) / rate_bytes_per_s_;
      tokens_ = 0.0;
      token_time_ = t.drain_finish;
    }
    last_finish_ = t.drain_finish;
    t.delivery = t.drain_finish + latency_s_;
    return t;
  }

 private:
  double rate_bytes_per_s_;
  double bucket_bytes_;
  double latency_s_;
  double tokens_ = 0.0;      // bucket starts empty
  double token_time_ = 0.0;  // instant the balance was last settled
  double last_finish_ = 0.0;
};

struct Delivery {
  std::vector<std::uint8_t> bytes;
  double enqueue_time = 0.0;
  double delivery_time = 0.0;
};

/// Virtual-time channel endpoint pair in one object: send() stamps messages
/// with the virtual clock and computes delivery instants; drain()/poll()
/// hand them to the receiving side. Bounded queue depth delays admission of
/// a send until the (depth)-th previous message has finished draining.
class EmulatedChannel {
 public:
  EmulatedChannel(const ChannelConfig& cfg, VirtualClock& clock)
      : cfg_(cfg), schedule_(cfg), clock_(&clock) {
    cfg.validate();
  }

  /// Enqueues at the current virtual time (or later if the queue is full).
  /// Returns the computed delivery record.
  const Delivery& send(std::vector<std::uint8_t> bytes, MessageKind kind) {
    double admit_floor = 0.0;
    if (recent_finishes_.size() >= cfg_.queue_depth) {
      admit_floor = recent_finishes_[recent_finishes_.size() - cfg_.queue_depth];
    }
    const auto timing = schedule_.enqueue(clock_->now(), bytes.size(), admit_floor);
    recent_finishes_.push_back(timing.drain_finish);
    stats_.bytes_sent += bytes.size();
    stats_.messages_sent[static_cast<std::size_t>(kind)] += 1;
    deliveries_.push_back(Delivery{std::move(bytes), timing.enqueue, timing.delivery});
    return deliveries_.back();
  }

  /// Messages whose delivery instant has passed on the virtual clock.
  std::vector<Delivery> poll() {
    std::vector<Delivery> out;
    while (next_ < deliveries_.size() && deliveries_[next_].delivery_time <= clock_->now()) {
      out.push_back(deliveries_[next_]);
      ++next_;
    }
    return out;
  }

  const std::vector<Delivery>& deliveries() const { return deliveries_; }
  const TransportStats& stats() const { return stats_; }
  VirtualClock& clock() { return *clock_; }

 private:
  ChannelConfig cfg_;
  TokenBucketSchedule schedule_;
  VirtualClock* clock_;
  std::vector<Delivery> deliveries_;
  std::deque<double> recent_finishes_;
  std::size_t next_ = 0;
  TransportStats stats_;
};

/// Wall-clock variant of the emulated channel for live in-process demos:
/// send() never blocks past queue admission, recv() sleeps until the
/// scheduled delivery instant. One sender thread, one receiver thread.
class RealtimeChannel {
 public:
  explicit RealtimeChannel(const ChannelConfig& cfg) : cfg_(cfg), schedule_(cfg) {
    cfg.validate();
    epoch_ = std::chrono::steady_clock::now();
  }

  void send(std::vector<std::uint8_t> bytes, MessageKind kind) {
    std::unique_lock lock(mu_);
    double admit_floor = 0.0;
    if (recent_finishes_.size() >= cfg_.queue_depth) {
      admit_floor = recent_finishes_[recent_finishes_.size() - cfg_.queue_depth];
    }
    const auto timing = schedule_.enqueue(elapsed(), bytes.size(), admit_floor);
    recent_finishes_.push_back(timing.drain_finish);
    stats_.bytes_sent += bytes.size();
    stats_.messages_sent[static_cast<std::size_t>(kind)] += 1;
    queue_.push_back(Delivery{std::move(bytes), timing.enqueue, timing.delivery});
    cv_.notify_one();
  }

  void close() {
    std::unique_lock lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  /// Blocks until the next message is due (or the channel closes).
  std::optional<Delivery> recv() {
    std::unique_lock lock(mu_);
    for (;;) {
      cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
      if (queue_.empty()) return std::nullopt;
      const double wait_s = queue_.front().delivery_time - elapsed();
      if (wait_s <= 0.0) {
        Delivery d = std::move(queue_.front());
        queue_.pop_front();
        return d;
      }
      lock.unlock();
      std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
      lock.lock();
    }
  }

  const TransportStats& stats() const { return stats_; }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
  }

  ChannelConfig cfg_;
  TokenBucketSchedule schedule_;
  std::chrono::steady_clock::time_point epoch_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Delivery> queue_;
  std::deque<double> recent_finishes_;
  bool closed_ = false;
  TransportStats stats_;
};

}  // namespace simsync
