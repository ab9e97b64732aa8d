#pragma once

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "crossgo/session.hpp"

namespace crossgo {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

namespace detail {

inline std::string mime_type(const std::filesystem::path& p)
{
    const auto ext = p.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/x-icon";
    return "application/octet-stream";
}

inline constexpr const char* kFallbackPage =
    "<!doctype html><title>crossgo</title><p>crossgo game service. Connect a WebSocket to <code>/ws</code> and send JSON "
    "requests (see docs/api.md).</p>\n";

}  // namespace detail

/// HTTP static files plus the JSON game API over WebSocket at /ws.
/// One thread per connection; sessions serialise their own requests.
class Server {
public:
    Server(SessionManager& api, const std::string& host, unsigned short port,
           std::optional<std::filesystem::path> static_dir = std::nullopt)
        : api_(api), static_dir_(std::move(static_dir)), acceptor_(ioc_)
    {
        const tcp::endpoint ep(boost::asio::ip::make_address(host), port);
        acceptor_.open(ep.protocol());
        acceptor_.set_option(boost::asio::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen();
    }

    ~Server()
    {
        stop();
        std::lock_guard lock(mutex_);
        for (auto& t : workers_)
            if (t.joinable()) t.join();
    }

    /// The bound port; differs from the requested one when that was 0.
    unsigned short port() const { return acceptor_.local_endpoint().port(); }

    /// Accepts connections until stop() is called.
    void run()
    {
        while (!stopped_) {
            tcp::socket socket(ioc_);
            beast::error_code ec;
            acceptor_.accept(socket, ec);
            if (ec || stopped_) break;
            auto shared = std::make_shared<tcp::socket>(std::move(socket));
            std::lock_guard lock(mutex_);
            open_.push_back(shared);
            workers_.emplace_back([this, shared] { serve_connection(*shared); });
        }
    }

    void stop()
    {
        if (stopped_.exchange(true)) return;
        beast::error_code ec;
        // A self-connection wakes a blocking accept.
        {
            tcp::socket poke(ioc_);
            poke.connect(tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), port()), ec);
        }
        acceptor_.close(ec);
        std::lock_guard lock(mutex_);
        for (auto& weak : open_)
            if (auto s = weak.lock()) s->shutdown(tcp::socket::shutdown_both, ec);
    }

private:
    void serve_connection(tcp::socket& socket)
    {
        beast::error_code ec;
        beast::flat_buffer buffer;
        for (;;) {
            http::request<http::string_body> req;
            http::read(socket, buffer, req, ec);
            if (ec) break;
            if (websocket::is_upgrade(req)) {
                if (req.target() == "/ws") serve_websocket(socket, req);
                return;
            }
            auto res = respond(req);
            http::write(socket, res, ec);
            if (ec || res.need_eof()) break;
        }
        socket.shutdown(tcp::socket::shutdown_send, ec);
    }

    // The stream borrows the socket so stop() can still shut it down.
    void serve_websocket(tcp::socket& socket, const http::request<http::string_body>& req)
    {
        websocket::stream<tcp::socket&> ws(socket);
        beast::error_code ec;
        ws.accept(req, ec);
        if (ec) return;
        ws.text(true);
        for (;;) {
            beast::flat_buffer buffer;
            ws.read(buffer, ec);
            if (ec) return;
            const auto reply = api_.handle_text(beast::buffers_to_string(buffer.data()));
            ws.write(boost::asio::buffer(reply), ec);
            if (ec) return;
        }
    }

    http::response<http::string_body> respond(const http::request<http::string_body>& req) const
    {
        auto make = [&](http::status status, std::string body, const std::string& type) {
            http::response<http::string_body> res{status, req.version()};
            res.set(http::field::server, "crossgo");
            res.set(http::field::content_type, type);
            res.keep_alive(req.keep_alive());
            res.body() = std::move(body);
            res.prepare_payload();
            return res;
        };
        if (req.method() != http::verb::get && req.method() != http::verb::head)
            return make(http::status::method_not_allowed, "method not allowed\n", "text/plain");
        std::string target(req.target());
        if (auto q = target.find('?'); q != std::string::npos) target.erase(q);
        if (target == "/health") return make(http::status::ok, "ok\n", "text/plain");
        if (target.empty() || target[0] != '/' || target.find("..") != std::string::npos)
            return make(http::status::bad_request, "bad path\n", "text/plain");
        if (target == "/") target = "/index.html";
        if (!static_dir_) {
            if (target == "/index.html") return make(http::status::ok, detail::kFallbackPage, "text/html; charset=utf-8");
            return make(http::status::not_found, "not found\n", "text/plain");
        }
        const auto path = *static_dir_ / target.substr(1);
        std::ifstream in(path, std::ios::binary);
        if (!in || std::filesystem::is_directory(path)) return make(http::status::not_found, "not found\n", "text/plain");
        std::ostringstream body;
        body << in.rdbuf();
        return make(http::status::ok, body.str(), detail::mime_type(path));
    }

    SessionManager& api_;
    std::optional<std::filesystem::path> static_dir_;
    boost::asio::io_context ioc_;
    tcp::acceptor acceptor_;
    std::atomic<bool> stopped_{false};
    std::mutex mutex_;
    std::list<std::thread> workers_;
    std::list<std::weak_ptr<tcp::socket>> open_;
};

}  // namespace crossgo
