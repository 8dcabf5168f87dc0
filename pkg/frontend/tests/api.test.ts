import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Call {
  url: string;
  method: string;
  body: unknown;
}

function fakeFetch(respond: (url: string, init?: RequestInit) => { status: number; body: unknown }) {
  const calls: Call[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    });
    const { status, body } = respond(url, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("ApiClient", () => {
  it("posts votes to the session route", async () => {
    const { impl, calls } = fakeFetch(() => ({ status: 200, body: { accepted: true } }));
    const client = new ApiClient("http://svc", impl);
    const result = await client.postVotes("abc123", [0, 2, 1]);
    expect(result.accepted).toBe(true);
    expect(calls[0].url).toBe("http://svc/api/sessions/abc123/votes");
    expect(calls[0].method).toBe("POST");
    expect(calls[0].body).toEqual({ votes: [0, 2, 1] });
  });

  it("omits the seed field when unset", async () => {
    const { impl, calls } = fakeFetch(() => ({ status: 200, body: { prompts: [] } }));
    const client = new ApiClient("", impl);
    await client.sampleModel("s", 8);
    expect(calls[0].body).toEqual({ count: 8 });
    await client.sampleModel("s", 8, 7);
    expect(calls[1].body).toEqual({ count: 8, seed: 7 });
  });

  it("adds the generation query parameter only when given", async () => {
    const { impl, calls } = fakeFetch(() => ({ status: 200, body: {} }));
    const client = new ApiClient("", impl);
    await client.getPopulation("s");
    await client.getPopulation("s", 3);
    expect(calls[0].url).toBe("/api/sessions/s/population");
    expect(calls[1].url).toBe("/api/sessions/s/population?generation=3");
  });

  it("maps service errors onto ApiError with the stable code", async () => {
    const { impl } = fakeFetch(() => ({
      status: 409,
      body: { error: { code: "evolve_in_progress", message: "busy" } },
    }));
    const client = new ApiClient("", impl);
    const err = await client.evolve("s").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("evolve_in_progress");
    expect(err.status).toBe(409);
  });

  it("maps transport failures onto service_unreachable", async () => {
    const client = new ApiClient("", async () => {
      throw new TypeError("fetch failed");
    });
    const err = await client.health().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("service_unreachable");
    expect(err.status).toBe(0);
  });

  it("keeps defaults when the error body is not JSON", async () => {
    const impl = async () => new Response("<html>boom</html>", { status: 502 });
    const client = new ApiClient("", impl);
    const err = await client.health().catch((e) => e);
    expect(err.code).toBe("http_error");
    expect(err.status).toBe(502);
  });
});
