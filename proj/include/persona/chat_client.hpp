#pragma once

#include "persona/util.hpp"

#include <memory>
#include <string>

namespace persona::aug {

/// Network or API-shaped failure from the chat backend.
struct ApiError : Error {
    using Error::Error;
};

struct ChatOptions {
    std::string base_url = "https://api.openai.com";
    std::string model_id = "gpt-3.5-turbo";
    std::string api_key;          // read from the environment by the CLI
    double temperature = 0.0;     // deterministic generation
    int max_response_tokens = 512;
    int timeout_seconds = 60;
};

struct ChatResult {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

/// One chat completion per call. Implementations must be safe for
/// concurrent complete() calls.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResult complete(const std::string& prompt) = 0; // throws ApiError
    virtual std::string model_id() const = 0;
};

/// Real HTTPS chat-completions client.
std::unique_ptr<ChatClient> make_http_chat_client(const ChatOptions& options);

} // namespace persona::aug
