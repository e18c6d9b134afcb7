import { HubApi } from "./api.js";
import { EventStream } from "./sse.js";
import { ConsoleStore } from "./state.js";
import type { HubEvent } from "./types.js";
import { mountConsole } from "./ui.js";

const base = window.location.origin;
const api = new HubApi(base);
const store = new ConsoleStore(api);

const stream = new EventStream(`${base}/events`, {
  onEvent: (data) => store.applyEvent(JSON.parse(data) as HubEvent),
  onStatus: (status) => {
    store.setConnection(status);
    if (status === "connected") {
      // refetch after every (re)connect so nothing pushed while we were
      // away is missed; upserts by id keep the list duplicate-free
      void store.refreshAll();
    }
  },
});

mountConsole(document.getElementById("app")!, store);
stream.start();
