#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "petmood/annotate.hpp"
#include "petmood/error.hpp"

namespace petmood {

// Bounded exponential backoff. Network errors, 429 and 5xx are retried;
// any other 4xx fails the batch immediately.
struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};

  std::chrono::milliseconds backoff_before(int retry) const {  // retry >= 1
    double ms = static_cast<double>(initial_backoff.count());
    for (int i = 1; i < retry; ++i) ms *= multiplier;
    ms = std::min(ms, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<long long>(ms));
  }
};

struct FetchOptions {
  std::size_t batch_size = 64;
  std::size_t max_parallel = 4;
  std::chrono::seconds timeout{30};
  RetryPolicy retry;
  // Replaceable so tests do not have to wait out real backoffs.
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

struct FetchFailure {
  std::string image_ref;
  std::string reason;
};

struct FetchResult {
  AnnotationStore store{Provenance::remote};
  std::vector<FetchFailure> failures;  // the failure manifest
  std::vector<std::string> retry_log;
  std::size_t retries = 0;

  bool complete() const noexcept { return failures.empty(); }
};

inline ordered_json to_json(const FetchFailure& f) { return {{"image_ref", f.image_ref}, {"reason", f.reason}}; }

namespace detail {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // request path for POST
};

inline Endpoint parse_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("annotator URL needs a scheme: '" + url + "'");
  const auto slash = url.find('/', scheme + 3);
  Endpoint e;
  e.origin = url.substr(0, slash);
  std::string base = slash == std::string::npos ? "" : url.substr(slash);
  while (!base.empty() && base.back() == '/') base.pop_back();
  e.path = base + "/annotate";
  return e;
}

struct BatchOutcome {
  std::vector<ImageAnnotation> annotations;
  std::vector<FetchFailure> failures;
  std::vector<std::string> log;
  std::size_t retries = 0;
};

inline bool retryable_status(int status) { return status == 429 || status >= 500; }

inline BatchOutcome fetch_batch(httplib::Client& client, const Endpoint& endpoint,
                                std::span<const std::string> refs, const FetchOptions& options) {
  BatchOutcome out;
  const std::string body = ordered_json{{"image_refs", std::vector<std::string>(refs.begin(), refs.end())}}.dump();
  const auto fail_all = [&](const std::string& reason) {
    for (const auto& r : refs) out.failures.push_back({r, reason});
  };

  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, options.retry.max_attempts); ++attempt) {
    if (attempt > 1) {
      ++out.retries;
      const auto delay = options.retry.backoff_before(attempt - 1);
      out.log.push_back("retry " + std::to_string(attempt - 1) + " for batch starting at '" + refs.front() +
                        "' after " + last_error + " (backoff " + std::to_string(delay.count()) + " ms)");
      options.sleep(delay);
    }
    auto res = client.Post(endpoint.path, body, "application/json");
    if (!res) {
      last_error = "network error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      if (retryable_status(res->status)) continue;
      fail_all(last_error);
      return out;
    }

    json payload;
    try {
      payload = json::parse(res->body);
    } catch (const json::exception&) {
      fail_all("response is not valid JSON");
      return out;
    }
    if (!payload.is_array()) {
      fail_all("response is not a JSON array");
      return out;
    }
    std::set<std::string> wanted(refs.begin(), refs.end());
    std::set<std::string> got;
    for (const auto& item : payload) {
      try {
        auto a = annotation_from_json(item);
        if (!wanted.count(a.image_ref)) {
          out.log.push_back("ignored unrequested image_ref '" + a.image_ref + "'");
          continue;
        }
        if (!got.insert(a.image_ref).second) {
          out.log.push_back("ignored duplicate image_ref '" + a.image_ref + "' in response");
          continue;
        }
        out.annotations.push_back(std::move(a));
      } catch (const ValidationError& e) {
        const auto ref = item.is_object() ? item.value("image_ref", std::string{}) : std::string{};
        if (wanted.count(ref) && !got.count(ref)) {
          got.insert(ref);
          out.failures.push_back({ref, std::string("schema violation: ") + e.what()});
        } else {
          out.log.push_back(std::string("unattributable schema violation: ") + e.what());
        }
      }
    }
    for (const auto& r : refs) {
      if (!got.count(r)) out.failures.push_back({r, "missing from response"});
    }
    return out;
  }
  fail_all("gave up after " + std::to_string(options.retry.max_attempts) + " attempts: " + last_error);
  return out;
}

}  // namespace detail

// POSTs {"image_refs": [...]} to <endpoint>/annotate in batches. Result
// assembly follows batch order, so the outcome does not depend on which
// worker finished first.
inline FetchResult fetch_annotations(std::span<const std::string> image_refs, const std::string& endpoint_url,
                                     const FetchOptions& options = {}) {
  const auto endpoint = detail::parse_endpoint(endpoint_url);
  if (options.batch_size == 0) throw ValidationError("batch size must be positive");

  std::vector<std::string> refs(image_refs.begin(), image_refs.end());
  std::sort(refs.begin(), refs.end());
  refs.erase(std::unique(refs.begin(), refs.end()), refs.end());

  const std::size_t n_batches = (refs.size() + options.batch_size - 1) / options.batch_size;
  std::vector<detail::BatchOutcome> outcomes(n_batches);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);
    for (std::size_t b = next++; b < n_batches; b = next++) {
      const std::size_t lo = b * options.batch_size;
      const std::size_t len = std::min(options.batch_size, refs.size() - lo);
      outcomes[b] = detail::fetch_batch(client, endpoint, std::span(refs).subspan(lo, len), options);
    }
  };
  const std::size_t n_workers = std::min(std::max<std::size_t>(1, options.max_parallel), n_batches);
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < n_workers; ++i) pool.emplace_back(worker);
    if (n_batches > 0) worker();
  }

  FetchResult result;
  for (auto& o : outcomes) {
    for (auto& a : o.annotations) result.store.add(std::move(a));
    result.failures.insert(result.failures.end(), o.failures.begin(), o.failures.end());
    result.retry_log.insert(result.retry_log.end(), o.log.begin(), o.log.end());
    result.retries += o.retries;
  }
  return result;
}

}  // namespace petmood
