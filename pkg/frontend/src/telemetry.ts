/**
 * Viewability and click telemetry over detected slots.
 *
 * A view fires when at least `threshold` of the slot's area first
 * intersects the viewport (default 0.5), once per slot per page load;
 * `firstViewOnly: false` re-arms after the slot fully leaves. Event ids
 * are deterministic per (page load, slot, occurrence) so client retries
 * stay idempotent server-side.
 */
import type { AdSlot } from './detect';
import type { Rect } from './page';
import { intersectionRatio } from './page';
import type { TelemetryEvent } from './wire';

export interface TrackerOptions {
  threshold?: number;
  firstViewOnly?: boolean;
}

interface SlotState {
  slot: AdSlot;
  inView: boolean;
  fired: number;
  // swapped slots report against the delivery, not the original ad
  refKind: 'ad' | 'swap';
  adRef: string;
}

export class ViewTracker {
  private threshold: number;
  private firstViewOnly: boolean;
  private states: SlotState[];
  readonly events: TelemetryEvent[] = [];

  constructor(slots: AdSlot[], opts: TrackerOptions = {}) {
    this.threshold = opts.threshold ?? 0.5;
    this.firstViewOnly = opts.firstViewOnly ?? true;
    this.states = slots.map((slot) => ({
      slot,
      inView: false,
      fired: 0,
      refKind: 'ad',
      adRef: slot.clientAdId,
    }));
  }

  /** Point a slot's telemetry at its swap delivery after replacement. */
  rebind(clientAdId: string, swapDeliveryId: string) {
    for (const st of this.states) {
      if (st.slot.clientAdId === clientAdId) {
        st.refKind = 'swap';
        st.adRef = swapDeliveryId;
      }
    }
  }

  /** Feed one viewport sample; returns events that fired on this sample. */
  scrollTo(viewport: Rect): TelemetryEvent[] {
    const fired: TelemetryEvent[] = [];
    for (const st of this.states) {
      const ratio = intersectionRatio(st.slot.element.rect, viewport);
      const visible = ratio >= this.threshold;
      if (visible && !st.inView) {
        st.inView = true;
        if (st.fired === 0 || !this.firstViewOnly) {
          st.fired += 1;
          const n = st.fired;
          fired.push({
            client_event_id: `${st.slot.clientAdId}:view${n > 1 ? n : ''}`,
            kind: 'view',
            ref_kind: st.refKind,
            ad_ref: st.adRef,
          });
        }
      } else if (!visible && ratio === 0) {
        st.inView = false; // re-arm only after fully leaving
      }
    }
    this.events.push(...fired);
    return fired;
  }

  clickOn(clientAdId: string): TelemetryEvent {
    const st = this.states.find((s) => s.slot.clientAdId === clientAdId);
    if (!st) throw new Error(`no such slot: ${clientAdId}`);
    const n = this.events.filter((e) => e.kind === 'click' && e.ad_ref === st.adRef).length + 1;
    const event: TelemetryEvent = {
      client_event_id: `${st.slot.clientAdId}:click${n > 1 ? n : ''}`,
      kind: 'click',
      ref_kind: st.refKind,
      ad_ref: st.adRef,
    };
    this.events.push(event);
    return event;
  }
}

export type EventSender = (events: TelemetryEvent[]) => Promise<unknown>;

/**
 * Batching uploader. Failed batches stay queued and retry with the
 * same event ids; the server deduplicates, so at-least-once is safe.
 */
export class EventUploader {
  private queue: TelemetryEvent[] = [];
  private send: EventSender;
  private batchSize: number;

  constructor(send: EventSender, batchSize = 50) {
    this.send = send;
    this.batchSize = batchSize;
  }

  enqueue(events: TelemetryEvent | TelemetryEvent[]) {
    this.queue.push(...(Array.isArray(events) ? events : [events]));
  }

  get pending(): number {
    return this.queue.length;
  }

  async flush(): Promise<number> {
    let sent = 0;
    while (this.queue.length) {
      const batch = this.queue.slice(0, this.batchSize);
      try {
        await this.send(batch);
      } catch {
        return sent; // keep the batch queued for the next flush
      }
      this.queue.splice(0, batch.length);
      sent += batch.length;
    }
    return sent;
  }
}
