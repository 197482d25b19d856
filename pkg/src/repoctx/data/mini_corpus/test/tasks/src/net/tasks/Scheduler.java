package net.tasks;

import net.tasks.model.*;

/*
 * Drains the queue round-robin.
 */
public class Scheduler {
    private final TaskQueue queue;
    private final WorkerPool pool;

    public Scheduler(TaskQueue queue, WorkerPool pool) {
        this.queue = queue;
        this.pool = pool;
    }

    public int drain() {
        int count = 0;
        while (!queue.isEmpty()) {
            pool.nextWorker().run(queue.pop());
            count++;
        }
        return count;
    }
}
