#pragma once

// Documentation generators. A Backend turns a Prompt into a raw completion;
// Backend::generate adds caching and post-processing on top.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "docbench/corpus.hpp"
#include "docbench/digest.hpp"
#include "docbench/error.hpp"
#include "docbench/parallel.hpp"
#include "docbench/prompts.hpp"

namespace docbench {

inline constexpr std::string_view kApiKeyEnv = "DOCBENCH_API_KEY";

struct GenerationParams {
    double temperature = 0.2;
    double top_p = 1.0;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
    int max_tokens = 256;
    std::vector<std::string> stop = {std::string(kStopMarker)};

    void validate() const {
        if (!(temperature >= 0.0)) throw ArgumentError("temperature must be >= 0");
        if (!(top_p > 0.0 && top_p <= 1.0)) throw ArgumentError("top_p must lie in (0,1]");
        if (max_tokens <= 0) throw ArgumentError("max_tokens must be positive");
    }

    nlohmann::json to_json() const {
        return {{"temperature", temperature},
                {"top_p", top_p},
                {"frequency_penalty", frequency_penalty},
                {"presence_penalty", presence_penalty},
                {"max_tokens", max_tokens},
                {"stop", stop}};
    }
};

struct GenerationResult {
    std::string raw;
    std::string doc;
    std::string backend_name;
    bool cached = false;
    bool empty_output = false;
    double latency_ms = 0.0;
};

// ---------------------------------------------------------------------------
// Post-processing

namespace detail {

inline bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace detail

// Cut at the first stop string, then at the first blank line after the
// leading whitespace; trim and collapse whitespace runs.
inline std::string postprocess(std::string_view raw, std::span<const std::string> stops) {
    std::size_t cut = raw.size();
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        cut = std::min(cut, raw.find(stop));
    }
    std::string_view text = raw.substr(0, cut);

    std::size_t start = 0;
    while (start < text.size() && detail::is_ws(text[start])) ++start;
    text.remove_prefix(start);
    for (std::size_t nl = text.find('\n'); nl != std::string_view::npos; nl = text.find('\n', nl + 1)) {
        std::size_t j = nl + 1;
        while (j < text.size() && text[j] != '\n' && detail::is_ws(text[j])) ++j;
        if (j < text.size() && text[j] == '\n') {
            text = text.substr(0, nl);
            break;
        }
    }

    std::string out;
    out.reserve(text.size());
    bool pending = false;
    for (char c : text) {
        if (detail::is_ws(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(c);
    }
    return out;
}

inline std::string postprocess(std::string_view raw) {
    const std::string stops[] = {std::string(kStopMarker)};
    return postprocess(raw, stops);
}

// ---------------------------------------------------------------------------
// Cache

inline std::string cache_key(std::string_view backend_name, std::string_view prompt_text,
                             const GenerationParams& params, std::string_view model = {}) {
    nlohmann::json keyed = {{"backend", backend_name}, {"model", model}, {"prompt", prompt_text},
                            {"params", params.to_json()}};
    return sha256_hex(keyed.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

// Content-addressed completion store: one JSON file per key under `dir`
// when a directory is given, otherwise memory only. Reads may run
// concurrently; writes are serialized.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(*dir_);
    }

    std::optional<std::string> get(const std::string& key) const {
        {
            std::shared_lock lock(mutex_);
            if (auto it = memory_.find(key); it != memory_.end()) return it->second;
        }
        if (!dir_) return std::nullopt;
        std::ifstream in(path_for(key), std::ios::binary);
        if (!in) return std::nullopt;
        auto doc = nlohmann::json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.contains("raw") || !doc["raw"].is_string()) return std::nullopt;
        auto raw = doc["raw"].get<std::string>();
        std::unique_lock lock(mutex_);
        memory_.emplace(key, raw);
        return raw;
    }

    void put(const std::string& key, std::string_view backend_name, const std::string& raw) {
        std::unique_lock lock(mutex_);
        memory_[key] = raw;
        if (!dir_) return;
        const auto final_path = path_for(key);
        const auto tmp = final_path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write cache entry " + tmp);
            nlohmann::json doc = {{"key", key}, {"backend", backend_name}, {"raw", raw}};
            out << doc.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
        }
        std::filesystem::rename(tmp, final_path);
    }

    const std::optional<std::filesystem::path>& directory() const { return dir_; }

private:
    std::filesystem::path path_for(const std::string& key) const { return *dir_ / (key + ".json"); }

    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mutex_;
    mutable std::unordered_map<std::string, std::string> memory_;
};

// ---------------------------------------------------------------------------

class Backend {
public:
    explicit Backend(std::shared_ptr<ResponseCache> cache)
        : cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()) {}
    virtual ~Backend() = default;

    virtual std::string name() const = 0;
    // Distinguishes configurations of the same backend in cache keys.
    virtual std::string model() const { return {}; }
    // Raw completion text for the prompt; throws BackendError on failure.
    virtual std::string complete(const Prompt& prompt, const GenerationParams& params) = 0;

    GenerationResult generate(const Prompt& prompt, const GenerationParams& params) {
        const auto started = std::chrono::steady_clock::now();
        GenerationResult result;
        result.backend_name = name();
        const auto key = cache_key(result.backend_name, prompt.text, params, model());
        const auto key_mutex = lock_for(key);
        std::lock_guard key_lock(*key_mutex);
        if (auto hit = cache_->get(key)) {
            result.raw = std::move(*hit);
            result.cached = true;
        } else {
            result.raw = complete(prompt, params);
            cache_->put(key, result.backend_name, result.raw);
        }
        result.doc = postprocess(result.raw, params.stop);
        result.empty_output = result.doc.empty();
        result.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        return result;
    }

    ResponseCache& cache() { return *cache_; }

private:
    // One mutex per key so concurrent duplicates wait for the first answer.
    std::shared_ptr<std::mutex> lock_for(const std::string& key) {
        std::lock_guard guard(keys_mutex_);
        auto& slot = key_locks_[key];
        if (!slot) slot = std::make_shared<std::mutex>();
        return slot;
    }

    std::shared_ptr<ResponseCache> cache_;
    std::mutex keys_mutex_;
    std::unordered_map<std::string, std::shared_ptr<std::mutex>> key_locks_;
};

using GenerationOutcome = std::variant<GenerationResult, std::string>;

// Generates for every prompt on `workers` threads; outcomes keep input
// order. A failed record carries its error message instead of a result.
inline std::vector<GenerationOutcome> generate_all(Backend& backend, std::span<const Prompt> prompts,
                                                   const GenerationParams& params, std::size_t workers) {
    std::vector<GenerationOutcome> outcomes(prompts.size());
    parallel_for_index(prompts.size(), workers, [&](std::size_t i) {
        try {
            outcomes[i] = backend.generate(prompts[i], params);
        } catch (const std::exception& e) {
            outcomes[i] = std::string(e.what());
        }
    });
    return outcomes;
}

// ---------------------------------------------------------------------------
// Retrieval baseline

// Identifier/number runs and single punctuation characters.
inline std::vector<std::string> code_token_set(std::string_view code) {
    std::vector<std::string> tokens;
    auto word = [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return std::isalnum(u) || c == '_' || u >= 0x80;
    };
    std::size_t i = 0;
    while (i < code.size()) {
        if (detail::is_ws(code[i])) {
            ++i;
        } else if (word(code[i])) {
            const std::size_t b = i;
            while (i < code.size() && word(code[i])) ++i;
            tokens.emplace_back(code.substr(b, i - b));
        } else {
            tokens.emplace_back(1, code[i++]);
        }
    }
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

namespace detail {

struct Overlap {
    std::size_t shared = 0;
    std::size_t combined = 0;

    // Exact comparison of shared/combined ratios; an empty union scores 0.
    bool greater_than(const Overlap& other) const {
        const std::size_t lhs = combined == 0 ? 0 : shared * std::max<std::size_t>(other.combined, 1);
        const std::size_t rhs = other.combined == 0 ? 0 : other.shared * std::max<std::size_t>(combined, 1);
        return lhs > rhs;
    }
};

inline Overlap overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::size_t shared = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++shared;
            ++ia;
            ++ib;
        }
    }
    return {shared, a.size() + b.size() - shared};
}

}  // namespace detail

inline double jaccard(std::string_view a, std::string_view b) {
    const auto o = detail::overlap(code_token_set(a), code_token_set(b));
    return o.combined == 0 ? 0.0 : static_cast<double>(o.shared) / static_cast<double>(o.combined);
}

// Index over a training split for repeated nearest-neighbour lookups.
class RetrievalIndex {
public:
    explicit RetrievalIndex(std::span<const CodeDocPair> train) {
        if (train.empty()) throw ArgumentError("retrieval baseline: empty training set");
        entries_.reserve(train.size());
        for (const auto& pair : train) entries_.push_back({pair.id, pair.doc, code_token_set(pair.code)});
    }

    // Doc of the training record with the highest code-token Jaccard
    // similarity; ties go to the smallest id.
    const std::string& nearest_doc(std::string_view code) const {
        const auto target = code_token_set(code);
        const Entry* best = nullptr;
        detail::Overlap best_overlap;
        for (const auto& e : entries_) {
            const auto o = detail::overlap(target, e.tokens);
            if (!best || o.greater_than(best_overlap) ||
                (!best_overlap.greater_than(o) && e.id < best->id)) {
                best = &e;
                best_overlap = o;
            }
        }
        return best->doc;
    }

private:
    struct Entry {
        std::string id;
        std::string doc;
        std::vector<std::string> tokens;
    };
    std::vector<Entry> entries_;
};

inline std::string retrieval_baseline(const CodeDocPair& target, std::span<const CodeDocPair> train) {
    return RetrievalIndex(train).nearest_doc(target.code);
}

class RetrievalBackend : public Backend {
public:
    explicit RetrievalBackend(std::span<const CodeDocPair> train, std::shared_ptr<ResponseCache> cache = nullptr)
        : Backend(std::move(cache)), index_(train), train_digest_(digest_of(train)) {}

    std::string name() const override { return "retrieval"; }
    // Answers depend on the training split, so it is part of the cache key.
    std::string model() const override { return "train:" + train_digest_; }

    std::string complete(const Prompt& prompt, const GenerationParams&) override {
        return index_.nearest_doc(prompt.target_code());
    }

private:
    static std::string digest_of(std::span<const CodeDocPair> train) {
        Sha256 hash;
        for (const auto& p : train) {
            hash.update(p.id).update(std::string_view("\0", 1)).update(p.code).update(std::string_view("\0", 1));
            hash.update(p.doc).update(std::string_view("\0", 1));
        }
        return hash.hex();
    }

    RetrievalIndex index_;
    std::string train_digest_;
};

// ---------------------------------------------------------------------------
// Remote completion endpoint

class TokenBucket {
public:
    // rate <= 0 disables limiting.
    TokenBucket(double rate_per_second, double burst)
        : rate_(rate_per_second), capacity_(std::max(burst, 1.0)), tokens_(capacity_),
          last_(std::chrono::steady_clock::now()) {}

    void acquire() {
        if (rate_ <= 0.0) return;
        std::unique_lock lock(mutex_);
        for (;;) {
            const auto now = std::chrono::steady_clock::now();
            tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
            lock.unlock();
            std::this_thread::sleep_for(wait);
            lock.lock();
        }
    }

private:
    double rate_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
};

struct RemoteOptions {
    std::string endpoint = "https://api.openai.com/v1/completions";
    std::string model = "code-davinci-002";
    int max_attempts = 5;
    int backoff_base_ms = 500;
    int backoff_max_ms = 30000;
    int timeout_ms = 60000;
    int max_in_flight = 4;
    double requests_per_second = 0.0;
};

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline Endpoint parse_endpoint(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw ConfigError("endpoint must be an absolute URL: " + std::string(url));
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ConfigError("unsupported endpoint scheme: " + std::string(scheme));
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string_view::npos) return {std::string(url), "/"};
    return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

inline std::string read_api_key() {
    const char* key = std::getenv(std::string(kApiKeyEnv).c_str());
    if (!key || !*key) {
        throw ConfigError(std::string(kApiKeyEnv) + " is not set; the remote backend needs a bearer token");
    }
    return key;
}

// JSON body for one completion request.
inline nlohmann::json completion_request_body(std::string_view model, const Prompt& prompt,
                                              const GenerationParams& params) {
    return {{"model", model},
            {"prompt", prompt.text},
            {"temperature", params.temperature},
            {"top_p", params.top_p},
            {"frequency_penalty", params.frequency_penalty},
            {"presence_penalty", params.presence_penalty},
            {"max_tokens", params.max_tokens},
            {"stop", params.stop}};
}

class RemoteBackend : public Backend {
public:
    // Reads the credential up front so a missing key fails before any request.
    explicit RemoteBackend(RemoteOptions options, std::shared_ptr<ResponseCache> cache = nullptr)
        : Backend(std::move(cache)), options_(std::move(options)), api_key_(read_api_key()),
          endpoint_(parse_endpoint(options_.endpoint)),
          in_flight_(std::max(options_.max_in_flight, 1)),
          bucket_(options_.requests_per_second, std::max(options_.max_in_flight, 1)) {
        if (options_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
    }

    std::string name() const override { return "remote"; }
    std::string model() const override { return options_.model; }

    std::size_t requests_sent() const { return requests_sent_.load(); }

    std::string complete(const Prompt& prompt, const GenerationParams& params) override {
        const std::string body =
            completion_request_body(options_.model, prompt, params)
                .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        std::string last_cause;
        for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
            bucket_.acquire();
            httplib::Result res = send(body);
            if (!res) {
                last_cause = "transport error: " + httplib::to_string(res.error());
            } else if (res->status >= 200 && res->status < 300) {
                return parse_completion(res->body);
            } else if (retryable(res->status)) {
                last_cause = "HTTP " + std::to_string(res->status);
            } else {
                throw BackendError("completion endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                   res->body.substr(0, 512));
            }
            if (attempt < options_.max_attempts) {
                std::this_thread::sleep_for(backoff(attempt, res ? res->get_header_value("Retry-After") : ""));
            }
        }
        throw BackendError("completion failed after " + std::to_string(options_.max_attempts) +
                           " attempts; last cause: " + last_cause);
    }

    // Delay before retry number `attempt + 1`: base * 2^(attempt-1), capped,
    // or the server's Retry-After seconds when given (also capped).
    std::chrono::milliseconds backoff(int attempt, const std::string& retry_after) const {
        long long delay = static_cast<long long>(options_.backoff_base_ms) << std::min(attempt - 1, 20);
        if (!retry_after.empty()) {
            char* end = nullptr;
            const double seconds = std::strtod(retry_after.c_str(), &end);
            if (end != retry_after.c_str() && seconds >= 0) delay = static_cast<long long>(seconds * 1000.0);
        }
        return std::chrono::milliseconds(std::min<long long>(delay, options_.backoff_max_ms));
    }

    static bool retryable(int status) { return status == 429 || status == 408 || status >= 500; }

private:
    httplib::Result send(const std::string& body) {
        in_flight_.acquire();
        struct Release {
            std::counting_semaphore<>& sem;
            ~Release() { sem.release(); }
        } release{in_flight_};
        httplib::Client client(endpoint_.origin);
        const auto timeout = std::chrono::milliseconds(options_.timeout_ms);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        client.set_bearer_token_auth(api_key_);
        ++requests_sent_;
        return client.Post(endpoint_.path, body, "application/json");
    }

    static std::string parse_completion(const std::string& body) {
        auto doc = nlohmann::json::parse(body, nullptr, false);
        if (doc.is_discarded()) throw BackendError("completion response is not JSON");
        const auto ptr = nlohmann::json::json_pointer("/choices/0/text");
        if (!doc.contains(ptr) || !doc[ptr].is_string()) {
            throw BackendError("completion response lacks choices[0].text");
        }
        return doc[ptr].get<std::string>();
    }

    RemoteOptions options_;
    std::string api_key_;
    Endpoint endpoint_;
    std::counting_semaphore<> in_flight_;
    TokenBucket bucket_;
    std::atomic<std::size_t> requests_sent_{0};
};

}  // namespace docbench
