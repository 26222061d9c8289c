#pragma once

// Per-step batch synthesis and the bounded producer queue feeding the update
// loop. Step s only depends on (seed, s), so a resumed run sees exactly the
// batches of an uninterrupted one.

#include <condition_variable>
#include <deque>
#include <exception>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>
#include <vector>

#include "fegan/dataprep.hpp"
#include "fegan/trainer/config.hpp"

namespace fegan::train {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Generator input, ground truth and erase mask for N samples.
struct Batch {
  Tensor<float> input;  // (N, 9, H, W)
  Tensor<float> gt;     // (N, 3, H, W)
  Tensor<float> mask;   // (N, 1, H, W)

  int size() const { return gt.dim(0); }
};

inline Batch stack_examples(const std::vector<dataprep::TrainingExample>& ex) {
  std::vector<Tensor<float>> in, gt, mask;
  for (const auto& e : ex) {
    in.push_back(e.batch.tensor());
    gt.push_back(e.target);
    mask.push_back(e.mask.tensor());
  }
  return {stack_batch<float>(in), stack_batch<float>(gt), stack_batch<float>(mask)};
}

/// "fixture:N" yields N procedural faces; anything else is a PNG directory.
inline std::vector<dataprep::SourceImage> load_dataset(const std::string& path, int height, int width) {
  std::vector<dataprep::SourceImage> out;
  if (path.starts_with("fixture:")) {
    int n = 0;
    try {
      n = std::stoi(path.substr(8));
    } catch (const std::exception&) {
      throw DatasetError("bad fixture count in '" + path + "'");
    }
    if (n < 1) throw DatasetError("fixture count must be positive");
    out = dataprep::fixture_sources(n, height, width);
  } else {
    if (!std::filesystem::is_directory(path)) throw DatasetError("dataset directory not found: " + path);
    if (dataprep::list_images(path).empty()) throw DatasetError("dataset " + path + " contains no images");
    out = dataprep::load_source_dir(path, height, width);
  }
  if (out.empty()) throw DatasetError("dataset " + path + " contains no images");
  return out;
}

/// Sample order: every epoch is a seeded permutation of the dataset.
inline std::vector<int> batch_indices(std::uint64_t seed, std::int64_t step, int batch_size, int dataset_size) {
  std::vector<int> out;
  std::int64_t cached_epoch = -1;
  std::vector<int> perm(static_cast<std::size_t>(dataset_size));
  for (int j = 0; j < batch_size; ++j) {
    const std::int64_t g = step * batch_size + j, epoch = g / dataset_size;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng(Rng::derive(Rng::derive(seed, 0x9e77), static_cast<std::uint64_t>(epoch)));
      for (int i = dataset_size - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(rng.below(i + 1))]);
      cached_epoch = epoch;
    }
    out.push_back(perm[static_cast<std::size_t>(g % dataset_size)]);
  }
  return out;
}

/// Fresh masks, strokes and noise for training step `step`.
inline Batch make_step_batch(const std::vector<dataprep::SourceImage>& data, const TrainConfig& cfg, std::int64_t step) {
  const std::uint64_t base = Rng::derive(Rng::derive(cfg.seed, 0xba7c), static_cast<std::uint64_t>(step));
  std::vector<dataprep::TrainingExample> ex;
  const auto idx = batch_indices(cfg.seed, step, cfg.batch_size, static_cast<int>(data.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    Rng rng(Rng::derive(base, j));
    ex.push_back(dataprep::make_training_example(rng, data[static_cast<std::size_t>(idx[j])], cfg.mask));
  }
  return stack_examples(ex);
}

/// Per-step stream for the interpolation weights of the gradient penalty.
inline Rng penalty_rng(std::uint64_t seed, std::int64_t step, int d_iteration) {
  return Rng(Rng::derive(Rng::derive(Rng::derive(seed, 0x6e41), static_cast<std::uint64_t>(step)),
                         static_cast<std::uint64_t>(d_iteration)));
}

template <class V>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  /// Blocks while full; returns false once closed.
  bool push(V value) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  /// Blocks while empty; nullopt once closed and drained.
  std::optional<V> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    V v = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<V> items_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
};

/// Background worker producing the batches of steps [first, last) in order.
class BatchProducer {
 public:
  BatchProducer(const std::vector<dataprep::SourceImage>& data, const TrainConfig& cfg, std::int64_t first,
                std::int64_t last)
      : queue_(static_cast<std::size_t>(cfg.queue_capacity)) {
    worker_ = std::thread([this, &data, &cfg, first, last] {
      try {
        for (std::int64_t s = first; s < last; ++s)
          if (!queue_.push(make_step_batch(data, cfg, s))) break;
      } catch (...) {
        std::lock_guard lock(error_mu_);
        error_ = std::current_exception();
      }
      queue_.close();
    });
  }
  ~BatchProducer() {
    queue_.close();
    worker_.join();
  }
  BatchProducer(const BatchProducer&) = delete;
  BatchProducer& operator=(const BatchProducer&) = delete;

  /// Next batch; rethrows a producer failure.
  Batch next() {
    auto b = queue_.pop();
    if (b) return std::move(*b);
    std::lock_guard lock(error_mu_);
    if (error_) std::rethrow_exception(error_);
    throw std::logic_error("batch producer exhausted");
  }

 private:
  BoundedQueue<Batch> queue_;
  std::thread worker_;
  std::mutex error_mu_;
  std::exception_ptr error_;
};

}  // namespace fegan::train
