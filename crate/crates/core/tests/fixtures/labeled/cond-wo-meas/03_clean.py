from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

q = QuantumRegister(3, "q")
c = ClassicalRegister(3, "c")
qc = QuantumCircuit(q, c)
qc.h(q[0])
qc.measure(q[0], c[0])
for i in range(1, 3):
    qc.x(q[i]).c_if(c, i)
qc.measure(q[1], c[1])
qc.measure(q[2], c[2])
