import { ApiClient } from "./api.js";
import { AppController } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const app = new AppController(root, new ApiClient(""));
void app.start();

// handy for poking at state from the console
(globalThis as Record<string, unknown>).traplineApp = app;
