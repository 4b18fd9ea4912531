#include <httplib.h>

#include "chainsim/rpc.hpp"

namespace chainsim::rpc {

struct HttpServer::Impl {
  httplib::Server server;
  std::mutex mutex;
};

HttpServer::HttpServer(Dispatcher &dispatcher, std::function<void()> on_request)
    : impl_(std::make_unique<Impl>()) {
  impl_->server.Post("/", [this, &dispatcher, on_request](const httplib::Request &req,
                                                          httplib::Response &res) {
    std::string body;
    {
      std::lock_guard lock(impl_->mutex);
      body = dispatcher.handle_text(req.body);
      if (on_request)
        on_request();
    }
    if (body.empty()) {
      res.status = 204;
      return;
    }
    res.set_content(body, "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string &host, int port) {
  return impl_->server.listen(host, port);
}

int HttpServer::bind_any(const std::string &host) {
  return impl_->server.bind_to_any_port(host);
}

bool HttpServer::serve() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

} // namespace chainsim::rpc
