#pragma once
// Live adapter: maps the model-client contract onto a hosted endpoint.
// POSTs {kind, payload} as JSON to <base_url>/call and expects
// {output, usage} back. Up to three attempts with exponential backoff.

#include <chrono>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "egqa/model_client.hpp"

namespace egqa {

class HttpClient : public ModelClient {
  public:
    explicit HttpClient(std::string base_url, int max_attempts = 3)
        : base_url_(std::move(base_url)), max_attempts_(max_attempts) {}

    ClientResponse call(const ClientRequest& req) override {
        json body{{"kind", std::string(to_string(req.kind))}, {"payload", req.payload}};
        std::string last_error;
        for (int attempt = 0; attempt < max_attempts_; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(200 << attempt));
            httplib::Client http(base_url_);
            auto res = http.Post("/call", body.dump(), "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "http status " + std::to_string(res->status);
                continue;
            }
            try {
                json doc = json::parse(res->body);
                ClientResponse out;
                out.output = doc.value("output", json());
                if (doc.contains("usage")) out.usage = doc.at("usage").get<Usage>();
                if (out.usage.prompt_tokens == 0 && out.usage.completion_tokens == 0) {
                    // Backend reported no usage: estimated, not measured.
                    out.usage.prompt_tokens = estimate_tokens(req.payload.dump());
                    out.usage.completion_tokens = estimate_tokens(out.output.dump());
                }
                return out;
            } catch (const std::exception& e) {
                last_error = std::string("bad response body: ") + e.what();
            }
        }
        throw ClientError("http client: " + std::to_string(max_attempts_) +
                          " attempts failed; last: " + last_error);
    }

  private:
    std::string base_url_;
    int max_attempts_;
};

}  // namespace egqa
