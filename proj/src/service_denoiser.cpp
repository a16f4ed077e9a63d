#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "aclm/denoiser.hpp"
#include "aclm/errors.hpp"

namespace aclm {

namespace {

using nlohmann::json;

bool transient_status(int status) {
  return status == 502 || status == 503 || status == 504;
}

void sleep_seconds(double seconds) {
  if (seconds <= 0.0) return;
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

}  // namespace

struct ServiceDenoiser::Impl {
  std::string host;
  int port;
  Options options;

  Impl(std::string h, int p, Options o) : host(std::move(h)), port(p), options(std::move(o)) {}

  httplib::Client make_client() const {
    httplib::Client client(host, port);
    const auto seconds = static_cast<time_t>(options.timeout_seconds);
    const auto usec =
        static_cast<time_t>((options.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, usec);
    client.set_read_timeout(seconds, usec);
    return client;
  }

  // POST with retry on transient failures. Each call uses its own client,
  // so concurrent generate() calls do not share connection state.
  json post(const std::string& path, const json& body) const {
    double backoff = options.backoff_seconds;
    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
      if (attempt > 0) {
        sleep_seconds(backoff);
        backoff *= 2.0;
      }
      auto client = make_client();
      auto res = client.Post(path, body.dump(), "application/json");
      if (!res) {
        last_failure = "connection to " + host + ":" + std::to_string(port) + " failed";
        continue;
      }
      if (transient_status(res->status)) {
        last_failure = "transient " + std::to_string(res->status) + ": " + res->body;
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw BackendError("denoiser service returned " + std::to_string(res->status) + ": " +
                           res->body);
      }
      return json::parse(res->body);
    }
    throw BackendError("denoiser service: retries exhausted (" + last_failure + ")");
  }

  json get(const std::string& path) const {
    auto client = make_client();
    auto res = client.Get(path);
    if (!res) throw BackendError("denoiser service unreachable");
    if (res->status < 200 || res->status >= 300) {
      throw BackendError("denoiser service returned " + std::to_string(res->status) + ": " +
                         res->body);
    }
    return json::parse(res->body);
  }
};

ServiceDenoiser::ServiceDenoiser(const std::string& host, int port, Options options)
    : impl_(std::make_unique<Impl>(host, port, std::move(options))) {}

ServiceDenoiser::~ServiceDenoiser() = default;

void ServiceDenoiser::fine_tune(const std::vector<TrainingPair>& pairs,
                                const FineTuneOptions& options) {
  json pair_list = json::array();
  for (const TrainingPair& pair : pairs) {
    pair_list.push_back({{"input", pair.input}, {"target", pair.target}});
  }
  const json request = {{"pairs", std::move(pair_list)},
                        {"hyperparameters",
                         {{"epochs", options.epochs},
                          {"learning_rate", options.learning_rate},
                          {"batch_size", options.batch_size}}}};
  const json started = impl_->post("/finetune", request);
  const std::string job_id = started.at("job_id").get<std::string>();

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(impl_->options.poll_timeout_seconds);
  while (true) {
    const json state = impl_->get("/finetune/" + job_id);
    const std::string status = state.at("status").get<std::string>();
    if (status == "completed") return;
    if (status == "failed") {
      throw BackendError("fine-tune job " + job_id + " failed: " + state.dump());
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      throw BackendError("fine-tune job " + job_id + " timed out");
    }
    sleep_seconds(impl_->options.poll_interval_seconds);
  }
}

std::vector<std::string> ServiceDenoiser::generate(const GenerationRequest& request) const {
  if (request.top_k < 1 || request.num_beams < 1) {
    throw ArgumentError("top_k and num_beams must be >= 1");
  }
  const json body = {{"template", request.template_tokens},
                     {"top_k", request.top_k},
                     {"num_beams", request.num_beams},
                     {"max_length", request.max_length},
                     {"seed", request.seed}};
  return impl_->post("/generate", body).at("tokens").get<std::vector<std::string>>();
}

}  // namespace aclm
