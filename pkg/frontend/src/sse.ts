/** Minimal server-sent-events reader over a fetch body stream.
 *
 * The gateway emits `data: <json>\n\n` records plus `: keep-alive` comment
 * lines; this parses that subset (no event ids or custom event names).
 */

export async function* sseData(
  stream: ReadableStream<Uint8Array>,
): AsyncGenerator<string> {
  const reader = stream.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    while (true) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let cut;
      while ((cut = buffer.indexOf("\n\n")) >= 0) {
        const record = buffer.slice(0, cut);
        buffer = buffer.slice(cut + 2);
        const data = parseRecord(record);
        if (data !== null) yield data;
      }
    }
    const tail = parseRecord(buffer);
    if (tail !== null) yield tail;
  } finally {
    reader.releaseLock();
  }
}

/** Join the data lines of one SSE record; null for comments/empty records. */
export function parseRecord(record: string): string | null {
  const parts: string[] = [];
  for (const line of record.split("\n")) {
    if (line.startsWith("data:")) {
      parts.push(line.slice(5).replace(/^ /, ""));
    }
  }
  return parts.length ? parts.join("\n") : null;
}
