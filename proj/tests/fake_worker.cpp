// Stand-in for the Python code worker. Speaks the same line protocol and
// interprets a tiny command language in "code":
//   echo <text>   stdout = text, value = text
//   tables        value = {name: row count}
//   sleep         never answers
//   crash         exits without answering
//   garbage       answers with a non-JSON line
//   wrong-id      answers with a different id
//   fail <text>   ok = false, error_text = text
// Flags: --version N (hello version), --no-hello.

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <thread>

using nlohmann::json;

int main(int argc, char** argv) {
    int version = 1;
    bool hello = true;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--version") == 0 && i + 1 < argc) version = std::atoi(argv[++i]);
        if (std::strcmp(argv[i], "--no-hello") == 0) hello = false;
    }
    if (hello) std::cout << json{{"hello", version}}.dump() << std::endl;

    std::string line;
    while (std::getline(std::cin, line)) {
        const json req = json::parse(line, nullptr, false);
        if (req.is_discarded()) return 3;
        if (req.contains("health")) {
            std::cout << json{{"health", req["health"]}}.dump() << std::endl;
            continue;
        }
        const std::string id = req.value("id", "");
        const std::string code = req.value("code", "");
        json resp{{"id", id}, {"ok", true}, {"stdout", ""}, {"value", nullptr}, {"error_text", nullptr}, {"elapsed_ms", 1}};
        if (code.rfind("echo ", 0) == 0) {
            resp["stdout"] = code.substr(5);
            resp["value"] = code.substr(5);
        } else if (code == "tables") {
            json counts = json::object();
            for (const auto& [name, rows] : req["tables"].items()) counts[name] = rows.size();
            resp["value"] = counts;
        } else if (code == "sleep") {
            for (;;) std::this_thread::sleep_for(std::chrono::seconds(1));
        } else if (code == "crash") {
            std::_Exit(9);
        } else if (code == "garbage") {
            std::cout << "this is not json" << std::endl;
            continue;
        } else if (code == "wrong-id") {
            resp["id"] = id + "-other";
        } else if (code.rfind("fail ", 0) == 0) {
            resp["ok"] = false;
            resp["error_text"] = code.substr(5);
        }
        std::cout << resp.dump() << std::endl;
    }
    return 0;
}
