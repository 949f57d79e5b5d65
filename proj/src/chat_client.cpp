#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "persona/chat_client.hpp"

#include "persona/log.hpp"

#include <httplib.h>
#include <json.hpp>

namespace persona::aug {

namespace {

class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ChatOptions options) : options_(std::move(options)) {
        if (options_.api_key.empty()) throw ConfigError("chat client: API key is empty");
    }

    ChatResult complete(const std::string& prompt) override {
        nlohmann::json body;
        body["model"] = options_.model_id;
        body["temperature"] = options_.temperature;
        body["max_tokens"] = options_.max_response_tokens;
        body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
        const std::string payload = body.dump();
        log::debug("chat request: " + payload.substr(0, 500));

        httplib::Client http(options_.base_url);
        http.set_connection_timeout(options_.timeout_seconds);
        http.set_read_timeout(options_.timeout_seconds);
        http.set_write_timeout(options_.timeout_seconds);
        httplib::Headers headers = {{"Authorization", "Bearer " + options_.api_key}};

        auto res = http.Post("/v1/chat/completions", headers, payload, "application/json");
        if (!res) {
            throw ApiError("chat request transport failure: " + httplib::to_string(res.error()));
        }
        log::debug("chat response status " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
        if (res->status != 200) {
            throw ApiError("chat request returned HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 300));
        }
        try {
            const auto j = nlohmann::json::parse(res->body);
            ChatResult out;
            out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            if (j.contains("usage")) {
                out.prompt_tokens = j["usage"].value("prompt_tokens", 0);
                out.completion_tokens = j["usage"].value("completion_tokens", 0);
            }
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw ApiError(std::string("chat response malformed: ") + e.what());
        }
    }

    std::string model_id() const override { return options_.model_id; }

private:
    ChatOptions options_;
};

} // namespace

std::unique_ptr<ChatClient> make_http_chat_client(const ChatOptions& options) {
    return std::make_unique<HttpChatClient>(options);
}

} // namespace persona::aug
