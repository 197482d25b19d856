package com.acme.billing;

import java.util.ArrayList;
import java.util.List;

public class SubscriptionManager {
    private final List<Subscription> subscriptions = new ArrayList<>();

    public void add(Subscription s) {
        subscriptions.add(s);
    }

    public int countPaid() {
        int n = 0;
        for (Subscription s : subscriptions) {
            if (s.getTier().isPaid()) {
                n++;
            }
        }
        return n;
    }
}
