import { ConsoleApp } from "./app.js";

declare global {
  interface Window {
    AGENTBUDDY_BASE_URL?: string;
    AGENTBUDDY_TOKEN?: string;
  }
}

const config = {
  baseUrl: window.AGENTBUDDY_BASE_URL ?? "http://127.0.0.1:8080",
  token: window.AGENTBUDDY_TOKEN ?? "demo-token",
};

const root = document.getElementById("app");
if (root) {
  const app = new ConsoleApp(config);
  app.attach(root);
  app.startPolling();
}
